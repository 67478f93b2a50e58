from __future__ import annotations
import os, sys, csv, json, pathlib
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np

from .config import CSV_DIGITS

def env_int(name: str, default: int) -> int:
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        print(f"[!] Valeur entière invalide dans {name}: {raw} — défaut {default}.", file=sys.stderr)
        return default

def env_float(name: str, default: float) -> float:
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        return float(raw)
    except ValueError:
        print(f"[!] Valeur réelle invalide dans {name}: {raw} — défaut {default}.", file=sys.stderr)
        return default

def env_flag(name: str, default: bool = False) -> bool:
    raw = os.getenv(name, "").strip().lower()
    if not raw:
        return default
    if raw in ("1", "true", "yes", "on", "oui"):
        return True
    if raw in ("0", "false", "no", "off", "non"):
        return False
    print(f"[!] Booléen invalide dans {name}: {raw} — défaut {default}.", file=sys.stderr)
    return default

def derive_seed(master: int, index: int) -> int:
    """Graine 64 bits d'une trajectoire, fonction de (graine maître, indice).

    Le mélange est celui de numpy.random.SeedSequence sur l'entropie
    [master, index] : même couple, même graine, quel que soit l'ordre
    d'exécution des réplicas.
    """
    ss = np.random.SeedSequence([int(master) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])

def rng_for(master: int, index: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, index))

def fmt(x: float) -> str:
    return f"{float(x):.{CSV_DIGITS}g}"

def write_csv(path: str | os.PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    p = pathlib.Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(list(header))
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return str(p)

def write_json(path: str | os.PathLike, data: Dict[str, Any]) -> str:
    p = pathlib.Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(data), f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")
    return str(p)

def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not np.isfinite(v):
            return None
        return float(fmt(v))
    return obj

def read_json(path: str | os.PathLike) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)

def as_float_list(values: Any) -> List[float]:
    if values is None:
        return []
    if isinstance(values, (int, float)):
        return [float(values)]
    return [float(v) for v in values]
