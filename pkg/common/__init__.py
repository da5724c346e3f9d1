__all__: list[str] = ["config"]
