"""Command line entry point: ``tlcd-rl run|compile|analyze|check-compat|report``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .automata import Alphabet, compile_ltlf, from_json, to_dot, to_json
from .causal import check_compatibility, classify_all
from .environments import load_environment
from .experiment import (
    ALGORITHMS, ExperimentConfig, cmd_run, convergence_step, default_learner_config,
    median_episode_length, read_csv,
)
from .learner import IncompatibleDiagram
from .ltlf import FormulaSyntaxError, UnknownProposition, atoms, parse_formula
from .tlcd import InvalidDiagram, TlcdSyntaxError, parse_tlcd, to_causal_dfa, to_formula


def _alphabet(names: str | None, fallback) -> Alphabet:
    if names:
        return Alphabet(tuple(n.strip() for n in names.split(",") if n.strip()))
    return Alphabet(tuple(sorted(fallback)))


def _run(args) -> int:
    learner = default_learner_config(
        args.env, alpha=args.alpha, gamma=args.gamma, epsilon=args.epsilon,
        eplength=args.eplength, total_training_steps=args.steps, eval_every=args.eval_every,
        eval_episodes=args.eval_episodes, seed=args.seed, q_init=args.q_init,
        counterfactual=args.counterfactual or None)
    cfg = ExperimentConfig(args.env, args.algo, args.runs, learner, args.out, args.svg, args.workers)
    try:
        results = cmd_run(cfg)
    except IncompatibleDiagram as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.out is None:
        from .experiment import format_csv
        sys.stdout.write(format_csv(results))
    t = convergence_step([r.curve for r in results]) if results[0].curve else None
    print(f"{args.algo} on {args.env}: {args.runs} runs, converged at "
          f"{t if t is not None else 'never'}, median episode length "
          f"{median_episode_length(results):g}", file=sys.stderr)
    return 0


def _compile(args) -> int:
    path = Path(args.input)
    if path.is_file():
        text = path.read_text()
        props = {a for line in text.splitlines() for a in _line_atoms(line)}
        alphabet = _alphabet(args.props, props)
        diagram = parse_tlcd(text, alphabet)
        print(f"formula: {to_formula(diagram)}", file=sys.stderr)
        dfa = to_causal_dfa(diagram, alphabet)
    else:
        formula = parse_formula(args.input)
        alphabet = _alphabet(args.props, atoms(formula))
        dfa = compile_ltlf(formula, alphabet)
    out = json.dumps(to_json(dfa), indent=2) + "\n" if args.json else to_dot(dfa, args.name)
    if args.out:
        Path(args.out).write_text(out)
    else:
        sys.stdout.write(out)
    print(f"states: {dfa.n_states}", file=sys.stderr)
    return 0


def _line_atoms(line: str):
    line = line.split("#", 1)[0].strip()
    if line.startswith("raw:"):
        line = line[4:]
    for part in line.split("=>"):
        if part.strip():
            yield from atoms(parse_formula(part))


def _automata(args):
    """Task DFA and causal DFA from a bundled/custom env or explicit files."""
    if args.task:
        task = from_json(Path(args.task).read_text())
        if not args.tlcd:
            raise SystemExit("error: --task needs --tlcd")
        diagram = parse_tlcd(Path(args.tlcd).read_text(), task.alphabet)
        return None, task, to_causal_dfa(diagram, task.alphabet)
    case = load_environment(args.env)
    diagram = case.tlcd
    if args.tlcd:
        diagram = parse_tlcd(Path(args.tlcd).read_text(), case.mdp.alphabet)
    return case, case.task, to_causal_dfa(diagram, case.mdp.alphabet)


def _analyze(args) -> int:
    _, task, causal = _automata(args)
    table = classify_all(task, causal)
    rows = [{"task_state": cfg.task_state, "causal_state": cfg.causal_state,
             "verdict": c.verdict.value, "witness": sorted(c.witness), "vacuous": c.vacuous}
            for cfg, c in sorted(table.items())]
    if args.json:
        print(json.dumps({"configurations": rows, "edge_visits": table.total_edge_visits}, indent=2))
    else:
        for r in rows:
            extra = " (vacuous)" if r["vacuous"] else ""
            print(f"({r['task_state']}, {r['causal_state']})  {r['verdict']}{extra}")
    return 0


def _check_compat(args) -> int:
    case, _, causal = _automata(args)
    if case is None:
        raise SystemExit("error: check-compat needs --env")
    result = check_compatibility(case.mdp, causal)
    if result:
        print("compatible")
        return 0
    s, q = result.counterexample
    print(f"incompatible: product state (mdp={case.mdp.state_names[s]}, causal={q}) "
          "cannot reach a causal final state")
    return 1


def _report(args) -> int:
    from .plotting import plot_curves
    curves = {}
    for item in args.csv:
        label, _, path = item.rpartition("=")
        label = label or Path(path).stem
        runs = read_csv(path)
        curves[label] = [runs[k] for k in sorted(runs)]
        t = convergence_step(curves[label]) if all(curves[label]) else None
        print(f"{label}: {len(runs)} runs, converged at {t if t is not None else 'never'}")
    if args.svg:
        plot_curves(curves, args.svg, title=args.title)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tlcd-rl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train QTLCD or QRM over several seeds")
    run.add_argument("--env", default="smalloffice",
                     help="smalloffice, largeoffice, crossroad, seed or a .map path")
    run.add_argument("--algo", choices=ALGORITHMS, default="qtlcd")
    run.add_argument("--runs", type=int, default=10)
    run.add_argument("--alpha", type=float)
    run.add_argument("--gamma", type=float)
    run.add_argument("--epsilon", type=float)
    run.add_argument("--eplength", type=int)
    run.add_argument("--steps", type=int, help="training steps per run")
    run.add_argument("--eval-every", type=int)
    run.add_argument("--eval-episodes", type=int)
    run.add_argument("--seed", type=int, help="base seed; run i uses seed + i")
    run.add_argument("--q-init", type=float, help="initial q-value")
    run.add_argument("--counterfactual", action="store_true",
                     help="update every task state's table on each step")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", type=Path, help="CSV output (default stdout)")
    run.add_argument("--svg", type=Path, help="learning-curve figure")
    run.set_defaults(func=_run)

    comp = sub.add_parser("compile", help="compile a formula or a TL-CD file to a minimal DFA")
    comp.add_argument("input", help="LTLf formula text or TL-CD file")
    comp.add_argument("--props", help="comma-separated alphabet (default: atoms, sorted)")
    comp.add_argument("--json", action="store_true", help="JSON instead of DOT")
    comp.add_argument("--name", default="A")
    comp.add_argument("--out", type=Path)
    comp.set_defaults(func=_compile)

    for name, func, text in (("analyze", _analyze, "classify every reachable configuration"),
                             ("check-compat", _check_compat, "check a TL-CD against an MDP")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--env", default="smalloffice")
        p.add_argument("--task", help="task DFA JSON (instead of --env)")
        p.add_argument("--tlcd", help="TL-CD file overriding the environment's")
        if name == "analyze":
            p.add_argument("--json", action="store_true")
        p.set_defaults(func=func)

    rep = sub.add_parser("report", help="summarize CSV files and overlay their curves")
    rep.add_argument("csv", nargs="+", help="[label=]path.csv")
    rep.add_argument("--svg", type=Path)
    rep.add_argument("--title")
    rep.set_defaults(func=_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidDiagram as exc:
        for v in exc.violations:
            print(f"invalid diagram: {v.message}", file=sys.stderr)
        return 2
    except (FormulaSyntaxError, UnknownProposition, TlcdSyntaxError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
