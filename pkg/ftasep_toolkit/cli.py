from __future__ import annotations
import os, sys, math, argparse, pathlib
from typing import List, Optional

import numpy as np

try:
    from dotenv import load_dotenv
except ImportError:
    load_dotenv = None

from .config import SAFETY_MARGIN, XMAX_FACTOR
from .distributions import CdfHandle
from .exp_kernel import ExpKernelParams
from .harness import ExperimentConfig, ExperimentRunner
from .lpp import sample_weights, passage_times, export_grid
from .particles import (
    ftasep_simulate, halfline_tasep_simulate, step_state, export_trajectory, verify_coupling,
)
from .pfaffian import QuadSpec, default_spec, pfaffian
from .utils import write_json, as_float_list

# 0 succès, 1 seuil non atteint, 2 configuration invalide, 3 échec numérique
EXIT_OK, EXIT_GATE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

def _out_dir(args) -> pathlib.Path:
    return pathlib.Path(args.out or os.getenv("KPZ_OUT", "").strip() or "kpz_out")

def _spec(args) -> QuadSpec:
    if args.nodes:
        return QuadSpec(args.nodes)
    return default_spec(verify=True) if args.verify_mode else default_spec()

def _grid(text: str) -> np.ndarray:
    """'lo:hi:step' (bornes incluses) ou liste séparée par des virgules."""
    if ":" in text:
        lo, hi, step = (float(v) for v in text.split(":"))
        if step <= 0 or hi < lo:
            raise ValueError(f"grille invalide: {text}")
        return np.round(lo + step * np.arange(int(np.floor((hi - lo) / step + 1e-9)) + 1), 12)
    return np.array([float(v) for v in text.split(",") if v.strip()])

def cmd_simulate(args) -> int:
    out = _out_dir(args)
    if args.model == "ftasep":
        n = args.particles or int(math.ceil(SAFETY_MARGIN * args.t)) + 10
        traj = ftasep_simulate(args.alpha, step_state(n + 1, args.alpha), args.t, args.seed, n_particles=n)
        rep = verify_coupling(traj) if args.alpha == 1.0 else None
        summary = {"model": "ftasep", "alpha": args.alpha, "t": args.t, "seed": args.seed,
                   "n_particles": n, "events": traj.n_events, "x1": int(traj.final.positions[0])}
        if rep is not None:
            summary["coupling_passed"] = rep.passed
    else:
        x_max = args.x_max or int(math.ceil(XMAX_FACTOR * args.t)) + 10
        traj = halfline_tasep_simulate(args.alpha, args.t, args.seed, x_max)
        summary = {"model": "halfline", "alpha": args.alpha, "t": args.t, "seed": args.seed,
                   "x_max": x_max, "events": traj.n_events, "injected": len(traj.waits),
                   "truncated": traj.truncated}
        if traj.truncated:
            print(f"[!] Une particule a atteint x_max={x_max} : résultats invalides.", file=sys.stderr)
    print(f"[+] {traj.n_events} événements simulés")
    print(f"    {export_trajectory(traj, out / 'trajectory.csv')}")
    print(f"    {write_json(out / 'summary.json', summary)}")
    return EXIT_OK

def cmd_lpp(args) -> int:
    out = _out_dir(args)
    weights = sample_weights(args.n, args.alpha, args.seed)
    grid = passage_times(weights)
    print(f"[+] H({args.n},{args.n}) = {grid.at(args.n, args.n):.6f}")
    print(f"    {export_grid(weights, grid, out / 'grid.csv')}")
    return EXIT_OK

def cmd_cdf(args) -> int:
    fam = args.family
    params = None
    eta = as_float_list(args.eta)
    if fam == "cross":
        params = {"varpi": args.varpi, "eta": eta or [0.0]}
    elif fam == "su":
        params = {"eta": eta}
    elif fam == "finite_n":
        params = ExpKernelParams(args.alpha, (args.n,), (args.m or args.n,))
    handle = CdfHandle(fam, params, _spec(args))
    xs = _grid(args.x)
    print(f"[*] {fam} sur {xs.size} point(s)…")
    path = handle.tabulate(xs, _out_dir(args) / f"cdf_{fam}.csv")
    print(f"[+] {path}")
    return EXIT_OK

def cmd_verify(args) -> int:
    """Vérifications rapides : algèbre de Pfaffien, queues des lois, couplage."""
    out = _out_dir(args)
    spec = _spec(args)
    rng = np.random.default_rng(args.seed)
    checks = {}
    worst = 0.0
    # 100 matrices anti-symétriques de dimension paire dans [2, 60]
    for d in 2 * rng.integers(1, 31, size=100):
        A = rng.standard_normal((d, d))
        A = A - A.T
        det = float(np.linalg.det(A))
        worst = max(worst, abs(pfaffian(A) ** 2 - det) / max(abs(det), 1e-300))
    checks["pfaffian_squared"] = {"max_rel_error": worst, "passed": worst < 1e-10}
    for fam in ("gue", "goe", "gse"):
        h = CdfHandle(fam, spec=spec)
        tail = abs(h(8.0) - 1.0)
        checks[f"{fam}_right_tail"] = {"error": tail, "passed": tail < 1e-6}
    bad = 0
    for s in range(args.seeds):
        traj = ftasep_simulate(1.0, step_state(2000), 1e9, s, max_events=2000)
        bad += verify_coupling(traj).violations
    checks["coupling"] = {"seeds": args.seeds, "violations": bad, "passed": bad == 0}
    ok = all(c["passed"] for c in checks.values())
    for name, c in checks.items():
        print(f"{'[+]' if c['passed'] else '[!]'} {name}")
    print(f"    {write_json(out / 'verify.json', {'checks': checks, 'passed': ok, 'nodes': spec.n_nodes})}")
    return EXIT_OK if ok else EXIT_GATE

def cmd_experiment(args) -> int:
    if not args.config:
        raise ValueError("--config requis pour 'experiment'")
    cfg = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.nodes:
        cfg.nodes = args.nodes
    cfg.validate()
    spec = _spec(args) if (args.nodes or args.verify_mode) else None
    report = ExperimentRunner(cfg, out_dir=args.out, workers=args.workers, spec=spec).run()
    return EXIT_OK if report.get("passed") else EXIT_GATE

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="Répertoire de sortie (défaut KPZ_OUT ou kpz_out)")
    common.add_argument("--nodes", type=int, default=None, help="Noeuds de Fredholm par composante")
    common.add_argument("--verify-mode", action="store_true", help="Résolution de vérification (doublée)")

    parser = argparse.ArgumentParser(prog="kpz", description="Simulation FTASEP / LPP demi-espace et lois de Fredholm.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="Trajectoire FTASEP ou TASEP demi-droite")
    p.add_argument("--model", choices=("ftasep", "halfline"), default="ftasep")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--t", type=float, default=100.0)
    p.add_argument("--particles", type=int, default=None)
    p.add_argument("--x-max", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("lpp", parents=[common], help="Grille de temps de passage H(n,m)")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_lpp)

    p = sub.add_parser("cdf", parents=[common], help="Tabulation d'une loi (x, F(x))")
    p.add_argument("--family", choices=("gaussian", "gue", "goe", "gse", "cross", "su", "finite_n"), required=True)
    p.add_argument("--x", default="-6:3:0.25", help="lo:hi:step ou liste x1,x2,…")
    p.add_argument("--varpi", type=float, default=0.0)
    p.add_argument("--eta", type=float, nargs="*", default=None)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--m", type=int, default=None)
    p.set_defaults(func=cmd_cdf)

    p = sub.add_parser("verify", parents=[common], help="Vérifications rapides")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=5)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("experiment", parents=[common], help="Expérience complète depuis un JSON")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_experiment)
    return parser

def main(argv: Optional[List[str]] = None) -> int:
    if load_dotenv is not None:
        load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except ValueError as ex:
        print(f"Erreur: {ex}", file=sys.stderr)
        code = EXIT_CONFIG
    except RuntimeError as ex:
        print(f"Erreur: {ex}", file=sys.stderr)
        code = EXIT_NUMERIC
    if argv is None:
        sys.exit(code)
    return code

if __name__ == "__main__":
    main()
