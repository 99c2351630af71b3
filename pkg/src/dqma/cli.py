"""Command line front end: ``run``, ``plan`` and ``sweep``.

Config files are JSON::

    {
      "protocol": "sgdiv" | "sgdi" | "seteq" | "seteq-classical" | "zh-locc" | "locc-convert",
      "seed": 7,                      # mandatory (here or via --seed)
      "mode": "exact" | "sample",
      "trials": 10000,                # sampled mode only
      "params": {...},                # protocol parameters, see README
      "strategy": {"kind": "honest"}, # adversary family
      "sweep": {"params.N": [1, 2, 3]}  # sweep command only, exactly one axis
    }

Exit codes: 0 ok, 2 config error, 3 capacity error.
"""
from __future__ import annotations

import argparse
import copy
import datetime as _dt
import json
import logging
import sys
from pathlib import Path

import numpy as np

from dqma.adversary import AdversaryFamily, realize
from dqma.errors import CapacityError, ConfigError, DqmaError
from dqma.netsim import _json_default
from dqma.report import SUMMARY_FIELDS, csv_text, flat_row, plot_sweep, write_csv

log = logging.getLogger("dqma")

PROTOCOLS = ("sgdiv", "sgdi", "seteq", "seteq-classical", "zh-locc", "locc-convert")
EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY = 0, 2, 3


# config handling ----------------------------------------------------------------


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON in {path}: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"missing field '{where}{key}'")
    return d[key]


def _int(d: dict, key: str, default=None, where: str = "params."):
    v = d.get(key, default)
    if v is None:
        raise ConfigError(f"missing field '{where}{key}'")
    try:
        return int(v)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"field '{where}{key}' must be an integer, got {v!r}") from e


def normalize(cfg: dict, seed=None, trials=None, mode=None) -> dict:
    cfg = copy.deepcopy(cfg)
    proto = _need(cfg, "protocol", "")
    if proto not in PROTOCOLS:
        raise ConfigError(f"field 'protocol': unknown protocol {proto!r}; expected one of {', '.join(PROTOCOLS)}")
    if seed is not None:
        cfg["seed"] = seed
    if trials is not None:
        cfg["trials"] = trials
    if mode is not None:
        cfg["mode"] = mode
    if "seed" not in cfg:
        raise ConfigError("missing field 'seed' (seeds are mandatory; set it in the config or pass --seed)")
    cfg["seed"] = _int(cfg, "seed", where="")
    cfg.setdefault("mode", "exact")
    if cfg["mode"] not in ("exact", "sample"):
        raise ConfigError(f"field 'mode' must be 'exact' or 'sample', got {cfg['mode']!r}")
    cfg["trials"] = _int(cfg, "trials", 1000, where="")
    if cfg["trials"] < 1:
        raise ConfigError("field 'trials' must be positive")
    cfg.setdefault("params", {})
    if not isinstance(cfg["params"], dict):
        raise ConfigError("field 'params' must be an object")
    cfg.setdefault("strategy", {"kind": "honest"})
    return cfg


# protocol dispatch -----------------------------------------------------------------


def _sgdi_input(p: dict, single: bool):
    from dqma.protocols.sgdi import SgdiInput

    if "psi" in p:
        d = dict(p)
        d.setdefault("k", 0 if single else 1)
        inp = SgdiInput.from_dict(d)
    else:
        rng = np.random.default_rng(_int(p, "instance_seed", 0))
        inp = SgdiInput.random(_int(p, "r"), _int(p, "n", 1), rng, k=_int(p, "k", 0 if single else 1),
                               m=_int(p, "m", 0), coin_at_end=bool(p.get("coin_at_end", False)))
    return inp


def _seteq_instance(p: dict):
    from dqma.ff import SetEqInstance, random_instance

    inst = p.get("instance")
    if isinstance(inst, dict) and "lists" in inst:
        try:
            return SetEqInstance.from_dict(inst)
        except (KeyError, TypeError) as e:
            raise ConfigError(f"field 'params.instance' is malformed: {e}") from e
    spec = inst if isinstance(inst, dict) else p
    r, ell = _int(spec, "r", 1), _int(spec, "ell", 1)
    prime = _int(spec, "p", 0)
    universe = _int(spec, "universe", prime or 4)
    c_tilde = spec.get("c_tilde")
    if c_tilde is None and prime:
        c_tilde = min(4.0, prime / (ell * (r + 1) * universe))
    rng = np.random.default_rng(_int(spec, "instance_seed", 0))
    return random_instance(rng, r, ell, universe, bool(spec.get("equal", True)), p=prime,
                           c_tilde=float(c_tilde if c_tilde is not None else 4.0))


def _family(cfg) -> AdversaryFamily:
    return AdversaryFamily.from_dict(cfg["strategy"])


def execute(cfg: dict) -> dict:
    """Run a normalized config; returns ``{"summary", "transcript", "extra"}``."""
    proto, p, mode, seed, trials = cfg["protocol"], cfg["params"], cfg["mode"], cfg["seed"], cfg["trials"]
    fam = _family(cfg)
    if proto in ("sgdiv", "sgdi"):
        from dqma.protocols.sgdi import chain_diagnostics, run_sgdi, run_sgdiv

        inp = _sgdi_input(p, proto == "sgdiv")
        if proto == "sgdiv":
            strat = realize(fam, inp, columns=1)
            res = run_sgdiv(inp, strat, mode, seed=seed, trials=trials)
            res.extra["chain"] = chain_diagnostics(inp, strat).to_dict()
        else:
            strat = realize(fam, inp)
            res = run_sgdi(inp, strat, mode, method=p.get("method", "auto"), seed=seed, trials=trials)
        return _pack(res)
    if proto == "seteq":
        from dqma.protocols.seteq import joint_input, run_seteq, side_input

        inst = _seteq_instance(p)
        k, m = _int(p, "k", 1), _int(p, "m", 0)
        method = p.get("method", "split")
        if method == "joint":
            strat = realize(fam, joint_input(inst, k, m))
        else:
            side = str(p.get("side", "A")).upper()
            if side not in ("A", "B"):
                raise ConfigError("field 'params.side' must be 'A' or 'B'")
            s = realize(fam, side_input(inst, side, k, m))
            strat = (s, None) if side == "A" else (None, s)
        res = run_seteq(inst, strat, mode, k, m, method=method, repetitions=_int(p, "repetitions", 1),
                        seed=seed, trials=trials)
        res.extra["instance"] = json.loads(inst.to_json())
        return _pack(res)
    if proto == "seteq-classical":
        return _classical(p, seed, trials)
    if proto == "zh-locc":
        from dqma.protocols.zh import ZhInput, run_zh_locc

        N = _int(p, "N")
        res = run_zh_locc(N, realize(fam, ZhInput(N)), mode, method=p.get("method", "auto"), seed=seed,
                          trials=trials)
        return _pack(res)
    if proto == "locc-convert":
        from dqma.protocols.locc import locc_convert, swap_equality_base

        b = p.get("base", {"kind": "swap-equality"})
        if b.get("kind", "swap-equality") != "swap-equality":
            raise ConfigError(f"field 'params.base.kind': unknown base protocol {b.get('kind')!r}")
        psi_a = np.asarray(b.get("psi_a", [1, 0]), dtype=complex)
        psi_b = np.asarray(b.get("psi_b", psi_a), dtype=complex)
        base = swap_equality_base(psi_a / np.linalg.norm(psi_a), psi_b / np.linalg.norm(psi_b))
        inst = locc_convert(base, gamma=p.get("gamma"), N=p.get("N"), delta=p.get("delta"),
                            constant=float(p.get("C", 1.0)))
        res = inst.run(realize(fam, inst), mode, seed=seed, trials=trials)
        res.extra["base_accept_probability"] = base.run().accept_probability if mode == "exact" else None
        return _pack(res)
    raise ConfigError(f"unknown protocol {proto!r}")


def _classical(p: dict, seed: int, trials: int) -> dict:
    from dqma.protocols import classical

    inst = _seteq_instance(p)
    scheme = p.get("scheme", "counting")
    if scheme not in ("counting", "trivial"):
        raise ConfigError("field 'params.scheme' must be 'counting' or 'trivial'")
    runner = classical.run_classical_seteq_counting if scheme == "counting" else classical.run_classical_seteq_trivial
    honest = runner(inst)
    fuzz = _int(p, "fuzz", 0)
    rng = np.random.default_rng(seed)
    accepted = wrong = 0
    for _ in range(fuzz):
        if scheme == "counting":
            certs = classical.fuzz_counting_certificates(inst, rng)
        else:
            certs = [list(c) for c in classical.honest_trivial_certificates(inst)]
            i = int(rng.integers(inst.r + 1))
            rows = [list(map(list, certs[i][0])), list(map(list, certs[i][1]))]
            side, j, e = int(rng.integers(2)), int(rng.integers(inst.r + 1)), int(rng.integers(inst.ell))
            rows[side][j][e] = int(rng.integers(inst.universe))
            certs[i] = (tuple(map(tuple, rows[0])), tuple(map(tuple, rows[1])))
        out = runner(inst, certs)
        if out.all_accept:
            accepted += 1
            wrong += out.verdict != out.truth
    summary = {
        "mode": "exact", "accept_probability": 1.0 if honest.accepted else 0.0, "ci": None, "trials": None,
        "output_fidelity": None, "branches": 1,
        "accounting": {"s_c": honest.certificate_bits, "s_m": honest.certificate_bits, "s_tm": 0, "classical_bits": honest.certificate_bits},
    }
    summary.update({
        "scheme": scheme, "honest": honest.summary(), "fuzzed": fuzz, "fuzzed_all_accept": accepted,
        "fuzzed_wrong_verdicts": wrong, "instance": json.loads(inst.to_json()),
    })
    return {"summary": summary, "transcript": None}


def _pack(res) -> dict:
    tr = res.transcripts[0].to_dict() if res.transcripts else None
    return {"summary": res.summary(), "transcript": tr}


def result_document(cfg: dict, out: dict) -> dict:
    return {
        "protocol": cfg["protocol"],
        "seed": cfg["seed"],
        "mode": cfg["mode"],
        "config": cfg,
        "result": out["summary"],
        "transcript_sample": out["transcript"],
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }


def dumps(doc) -> str:
    return json.dumps(_clean(doc), sort_keys=True, indent=2, default=_json_default)


def _clean(o):
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, (np.floating, float)):
        f = float(o)
        return f if np.isfinite(f) else str(f)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    return o


# commands --------------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = normalize(load_config(args.config), args.seed, args.trials, args.mode)
    log.info("running %s in %s mode (seed %d)", cfg["protocol"], cfg["mode"], cfg["seed"])
    out = execute(cfg)
    doc = result_document(cfg, out)
    row = flat_row(cfg["protocol"], out["summary"], cfg["seed"])
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "results.json").write_text(dumps(doc) + "\n")
    write_csv([row], outdir / "results.csv", SUMMARY_FIELDS)
    if args.format == "csv":
        sys.stdout.write(csv_text([row], SUMMARY_FIELDS))
    else:
        sys.stdout.write(dumps(_clean(out["summary"])) + "\n")
    return EXIT_OK


def cmd_plan(args) -> int:
    from dqma.protocols.planner import plan_parameters

    try:
        res = plan_parameters(args.r, args.n, args.c, args.eta, args.epsilon, args.delta, args.d, args.K,
                              args.total, args.C)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    if args.format == "json":
        sys.stdout.write(json.dumps(res.as_dict(), sort_keys=True, indent=2) + "\n")
    elif args.format == "csv":
        sys.stdout.write(csv_text([res.as_dict()]))
    else:
        sys.stdout.write(res.table() + "\n")
    return EXIT_OK


def _set_path(cfg: dict, path: str, value) -> None:
    keys = path.split(".")
    cur = cfg
    for k in keys[:-1]:
        nxt = cur.get(k)
        if not isinstance(nxt, dict):
            nxt = {}
            cur[k] = nxt
        cur = nxt
    cur[keys[-1]] = value


def sweep_rows(cfg: dict) -> tuple[str, list[dict]]:
    sweep = cfg.get("sweep")
    if not isinstance(sweep, dict) or not sweep:
        raise ConfigError("missing field 'sweep' (an object mapping one parameter path to a list of values)")
    if len(sweep) != 1:
        raise ConfigError(f"field 'sweep' must have exactly one axis, got {len(sweep)}: {sorted(sweep)}")
    (axis, values), = sweep.items()
    if not isinstance(values, list) or not values:
        raise ConfigError(f"field 'sweep.{axis}' must be a non-empty list")
    rows = []
    for v in values:
        point = copy.deepcopy(cfg)
        point.pop("sweep")
        _set_path(point, axis, v)
        out = execute(normalize(point))
        row = {"axis": axis, "value": v}
        row.update(flat_row(point["protocol"], out["summary"], point["seed"]))
        s = out["summary"]
        for key in ("final_swap_accept", "generation_accept", "completeness_bound", "soundness_bound",
                    "fuzzed_wrong_verdicts"):
            if key in s:
                row[key] = s[key]
        rows.append(row)
    return axis, rows


def cmd_sweep(args) -> int:
    raw = load_config(args.config)
    cfg = normalize(raw, args.seed, args.trials, args.mode)
    cfg["sweep"] = raw.get("sweep")
    axis, rows = sweep_rows(cfg)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_csv(rows, outdir / "sweep.csv")
    doc = {"protocol": cfg["protocol"], "seed": cfg["seed"], "axis": axis, "rows": rows,
           "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat()}
    (outdir / "sweep.json").write_text(dumps(doc) + "\n")
    plot_sweep(rows, axis, outdir / "sweep.png", title=f"{cfg['protocol']} sweep over {axis}")
    if args.format == "json":
        sys.stdout.write(dumps(rows) + "\n")
    else:
        sys.stdout.write(csv_text(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dqma", description="Distributed quantum certification experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--mode", choices=("exact", "sample"), default=None)
        p.add_argument("--out-dir", default="results")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    common(sub.add_parser("run", help="run one experiment"))
    common(sub.add_parser("sweep", help="run a one-axis parameter sweep"))
    pl = sub.add_parser("plan", help="print protocol parameters")
    pl.add_argument("--r", type=int, required=True)
    pl.add_argument("--n", type=int, default=1)
    pl.add_argument("--c", type=float, default=1.0)
    pl.add_argument("--eta", type=float, default=0.0)
    pl.add_argument("--epsilon", type=float, default=None)
    pl.add_argument("--delta", type=float, default=None)
    pl.add_argument("--d", type=float, default=None, help="subsystem dimension for the de Finetti term")
    pl.add_argument("--K", type=int, default=None)
    pl.add_argument("--total", type=int, default=None, help="number of subsystems for the de Finetti term")
    pl.add_argument("--C", type=float, default=1.0, help="constant in the EPR copy count")
    pl.add_argument("--format", choices=("table", "json", "csv"), default="table")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {"run": cmd_run, "plan": cmd_plan, "sweep": cmd_sweep}
    try:
        return handlers[args.command](args)
    except CapacityError as e:
        print(f"capacity error: {e}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ConfigError, DqmaError, ValueError, KeyError, TypeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
