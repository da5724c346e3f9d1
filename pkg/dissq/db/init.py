from pathlib import Path
from threading import Lock

from tinydb import TinyDB

from common.config import simulation_settings

DB_PATH = simulation_settings.DISSQ_RESULTS_DB
_db = None
_lock = Lock()


def get_db() -> TinyDB:
    global _db
    if _db is None:
        with _lock:
            if _db is None:
                Path(DB_PATH).parent.mkdir(parents=True, exist_ok=True)
                _db = TinyDB(DB_PATH)
    return _db
