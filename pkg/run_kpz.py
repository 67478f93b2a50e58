# Python 3.11+
# Point d'entrée : `python run_kpz.py experiment --config exp.json`
from __future__ import annotations

from ftasep_toolkit.cli import main

if __name__ == "__main__":
    main()
