"""Experiment harness: verify, train, eval and synth subcommands.

One self-describing JSON config per run; all randomness flows through a
single seeded Philox generator.  Primary outputs (codebooks, traces,
datasets, specs) are byte-identical across reruns with the same config and
seed; the run summary additionally records wall time and is therefore not
covered by that guarantee.
"""

from __future__ import annotations

import argparse
import sys
import time

from . import ace as ace_mod
from . import chain as chain_mod
from . import helmholtz as hm_mod
from . import ladder as ladder_mod
from . import pmd as pmd_mod
from . import softvq as vq_mod
from .errors import CapExceeded, CoderError, SchemaError
from .serialization import (
    chain_from_dict,
    chain_to_dict,
    check_fields,
    codebook_to_dict,
    config_hash,
    dataset_from_dict,
    dataset_to_dict,
    expect_int,
    expect_list,
    expect_mapping,
    expect_number,
    expect_str,
    instance_from_dict,
    leak_from_dict,
    load_json,
    pmd_config_from_dict,
    tree_from_dict,
    tree_to_dict,
    write_csv,
    write_json,
)
from .synth import (
    factors_data,
    gmm_data,
    make_rng,
    random_chain,
    random_tree_source,
    uniform_data,
)
from .verify import SCOPES, run_checks


def _load_data(block, ctx: str):
    block = expect_mapping(block, ctx)
    if "path" in block:
        check_fields(block, {"path"}, set(), ctx)
        obj = load_json(expect_str(block, "path", ctx), ctx)
        return dataset_from_dict(obj, ctx)[0]
    return dataset_from_dict(block, ctx)[0]


def _sigma_schedule(cfg: dict, ctx: str) -> vq_mod.SigmaSchedule:
    sigma0 = expect_number(cfg, "sigma0", ctx)
    rate = expect_number(cfg, "rate", ctx) if "rate" in cfg else 1.0
    return vq_mod.SigmaSchedule(sigma0, rate)


def _trace_csv_rows(trace) -> tuple[list[str], list[list]]:
    header = ["iteration", "dvq", "code_length_term", "constant_term", "total_bits"]
    rows = [
        [r.iteration, r.dvq, r.code_length_term, r.constant_term, r.total_bits]
        for r in trace
    ]
    return header, rows


def cmd_train(config: dict, out_dir: str, seed_override: int | None) -> int:
    ctx = "train config"
    config = expect_mapping(config, ctx)
    kind = expect_str(config, "kind", ctx) if "kind" in config else None
    if kind not in ("vq", "ladder", "topo", "pmd"):
        raise SchemaError(f"{ctx}: field 'kind' must be one of vq|ladder|topo|pmd")
    seed = seed_override if seed_override is not None else expect_int(config, "seed", ctx)
    started = time.perf_counter()

    if kind == "vq":
        check_fields(
            config,
            {"kind", "seed", "data", "m", "sigma0", "iterations"},
            {"rate", "volume", "q_update"},
            ctx,
        )
        data = _load_data(config["data"], ctx)
        enc, code, q, trace = vq_mod.train_soft_vq(
            data,
            expect_int(config, "m", ctx),
            _sigma_schedule(config, ctx),
            q_update=bool(config.get("q_update", True)),
            iterations=expect_int(config, "iterations", ctx),
            seed=seed,
            volume=float(config.get("volume", 1.0)),
        )
        header, rows = _trace_csv_rows(trace)
        codebook_doc = codebook_to_dict(code)
        codebook_doc["output_prior"] = q.probs.tolist()
        summary_extra = {}
    elif kind == "topo":
        check_fields(
            config,
            {"kind", "seed", "data", "m", "sigma0", "iterations", "leak"},
            {"rate", "volume"},
            ctx,
        )
        data = _load_data(config["data"], ctx)
        m = expect_int(config, "m", ctx)
        leak = leak_from_dict(config["leak"], m, ctx)
        enc, code, trace, metrics = ladder_mod.train_topo_map(
            data,
            m,
            leak,
            _sigma_schedule(config, ctx),
            iterations=expect_int(config, "iterations", ctx),
            seed=seed,
            volume=float(config.get("volume", 1.0)),
        )
        header, rows = _trace_csv_rows(trace)
        codebook_doc = codebook_to_dict(code)
        summary_extra = {
            "ordering_metrics": {
                "inversion_count": metrics.inversion_count,
                "path_length_ratio": metrics.path_length_ratio,
            }
        }
    elif kind == "ladder":
        check_fields(
            config,
            {"kind", "seed", "data", "sizes", "sigma0", "iterations"},
            {"rate", "volumes", "rep"},
            ctx,
        )
        data = _load_data(config["data"], ctx)
        sizes = [int(m) for m in expect_list(config, "sizes", ctx)]
        ladder, trace = ladder_mod.train_ladder(
            data,
            sizes,
            _sigma_schedule(config, ctx),
            iterations=expect_int(config, "iterations", ctx),
            seed=seed,
            volumes=config.get("volumes"),
            rep=config.get("rep", "one_hot"),
        )
        header = ["iteration"]
        header += [f"dvq_{l}" for l in range(len(sizes))]
        header += ["code_length_term", "total_bits"]
        rows = [[row[h] for h in header] for row in trace]
        codebook_doc = {
            "stages": [codebook_to_dict(s.codebook) for s in ladder.stages],
            "top_prior": ladder.top_prior.probs.tolist(),
        }
        summary_extra = {}
    else:  # pmd
        check_fields(
            config,
            {"kind", "seed", "data", "pmd", "sigma", "iterations"},
            {"volume"},
            ctx,
        )
        data = _load_data(config["data"], ctx)
        cfg = pmd_config_from_dict(config["pmd"], ctx)
        rng = make_rng(seed)
        init_vectors = vq_mod.init_codebook_vectors(data, cfg.m, rng)
        init = vq_mod.GaussianCodebook(
            init_vectors,
            expect_number(config, "sigma", ctx),
            float(config.get("volume", 1.0)),
        )
        code, enc, trace = pmd_mod.train_pmd_stage(
            data, cfg, init, iterations=expect_int(config, "iterations", ctx), seed=seed
        )
        header, rows = _trace_csv_rows(trace)
        codebook_doc = codebook_to_dict(code)
        summary_extra = {}

    write_json(f"{out_dir}/codebook.json", codebook_doc)
    write_csv(f"{out_dir}/trace.csv", header, rows)
    final = trace[-1]
    summary = {
        "kind": kind,
        "seed": seed,
        "config_hash": config_hash(config),
        "iterations": expect_int(config, "iterations", ctx),
        "unit": "bits",
        "final": final if isinstance(final, dict) else {
            "dvq": final.dvq,
            "code_length_term": final.code_length_term,
            "constant_term": final.constant_term,
            "total_bits": final.total_bits,
        },
        "wall_time_seconds": time.perf_counter() - started,
    }
    summary.update(summary_extra)
    write_json(f"{out_dir}/summary.json", summary)
    print(f"train {kind}: wrote codebook.json, trace.csv, summary.json to {out_dir}")
    return 0


def cmd_eval(kind: str, spec_path: str, unit: str, out_dir: str | None) -> int:
    obj = load_json(spec_path, "eval spec")
    if kind == "chain":
        c = chain_from_dict(obj)
        report = {
            "objective_reversed": chain_mod.objective_reversed(c, unit),
            "objective_forward": chain_mod.objective_forward(c, unit),
            "input_code_length": chain_mod.input_code_length(c, unit),
            "joint_source_entropy": chain_mod.joint_source_entropy(c, unit),
        }
        try:
            report["objective_bruteforce"] = chain_mod.objective_bruteforce(c, unit)
        except CapExceeded:
            report["objective_bruteforce"] = None
    elif kind == "skip":
        c = chain_from_dict(obj)
        report = {
            "skip_layer_objective": chain_mod.skip_layer_objective(c, unit),
            "objective_reversed": chain_mod.objective_reversed(c, unit),
        }
    elif kind == "ace":
        ts = tree_from_dict(obj)
        value, mi_sum, h0_sum = ace_mod.ace_tree_objective(ts, unit)
        report = {
            "value": value,
            "mi_sum": mi_sum,
            "h0_sum": h0_sum,
            "structural": ace_mod.ace_tree_objective_structural(ts, unit),
        }
    elif kind == "hm":
        inst = instance_from_dict(obj)
        report = hm_mod.sandwich_report(inst, unit).to_dict()
    else:
        raise SchemaError("eval kind must be one of chain|skip|ace|hm")
    report["unit"] = unit
    for key in sorted(report):
        print(f"{key} = {report[key]}")
    if out_dir is not None:
        write_json(f"{out_dir}/eval_report.json", report)
    return 0


def cmd_synth(config: dict, out_dir: str, seed_override: int | None) -> int:
    ctx = "synth config"
    config = expect_mapping(config, ctx)
    kind = expect_str(config, "kind", ctx) if "kind" in config else None
    seed = seed_override if seed_override is not None else expect_int(config, "seed", ctx)
    rng = make_rng(seed)
    if kind == "uniform":
        check_fields(config, {"kind", "seed", "n"}, {"low", "high", "dim"}, ctx)
        data = uniform_data(
            rng,
            expect_int(config, "n", ctx),
            float(config.get("low", 0.0)),
            float(config.get("high", 1.0)),
            int(config.get("dim", 1)),
        )
        doc, name = dataset_to_dict(data), "dataset.json"
    elif kind == "gmm":
        check_fields(config, {"kind", "seed", "n", "means", "sigmas"}, {"mix"}, ctx)
        data, labels = gmm_data(
            rng,
            expect_int(config, "n", ctx),
            expect_list(config, "means", ctx),
            expect_list(config, "sigmas", ctx),
            config.get("mix"),
        )
        doc, name = dataset_to_dict(data, labels), "dataset.json"
    elif kind == "factors":
        check_fields(
            config, {"kind", "seed", "n", "levels_a", "levels_b"}, {"jitter"}, ctx
        )
        data, labels = factors_data(
            rng,
            expect_int(config, "n", ctx),
            expect_list(config, "levels_a", ctx),
            expect_list(config, "levels_b", ctx),
            float(config.get("jitter", 0.0)),
        )
        doc, name = dataset_to_dict(data, labels), "dataset.json"
    elif kind == "chain":
        check_fields(config, {"kind", "seed", "layer_sizes"}, set(), ctx)
        doc = chain_to_dict(
            random_chain(rng, expect_list(config, "layer_sizes", ctx))
        )
        name = "chain.json"
    elif kind == "tree":
        check_fields(
            config,
            {"kind", "seed"},
            {"layer0_alphabets", "cluster_sizes", "parent_alphabets"},
            ctx,
        )
        ts = random_tree_source(
            rng,
            tuple(config.get("layer0_alphabets", (2, 2, 2))),
            tuple(config.get("cluster_sizes", (2, 1))),
            tuple(config.get("parent_alphabets", (2, 2))),
        )
        doc, name = tree_to_dict(ts), "tree.json"
    else:
        raise SchemaError(f"{ctx}: field 'kind' must be one of uniform|gmm|factors|chain|tree")
    write_json(f"{out_dir}/{name}", doc)
    print(f"synth {kind}: wrote {name} to {out_dir}")
    return 0


def cmd_verify(scope: str, seed: int, out_dir: str | None, fixture: str | None) -> int:
    results = run_checks(scope, seed)
    if fixture is not None:
        start = time.perf_counter()
        try:
            c = chain_from_dict(load_json(fixture, "chain fixture"), "chain fixture")
            gap = max(
                abs(chain_mod.objective_forward(c) - chain_mod.objective_reversed(c)),
                abs(chain_mod.objective_bruteforce(c) - chain_mod.objective_reversed(c)),
            )
            passed, detail = gap < 1e-10, f"decomposition gap {gap:.3e}"
        except CoderError as exc:
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        from .verify import CheckResult

        results.append(
            CheckResult("chain-fixture", "chain", passed, detail, time.perf_counter() - start)
        )
    all_passed = all(r.passed for r in results)
    for r in results:
        flag = "PASS" if r.passed else "FAIL"
        print(f"[{flag}] {r.check_id:<26} ({r.seconds:6.2f}s) {r.detail}")
    print(f"verify: {sum(r.passed for r in results)}/{len(results)} checks passed")
    if out_dir is not None:
        write_json(
            f"{out_dir}/verify_report.json",
            {
                "scope": scope,
                "seed": seed,
                "all_passed": all_passed,
                "checks": [
                    {
                        "id": r.check_id,
                        "scope": r.scope,
                        "passed": r.passed,
                        "detail": r.detail,
                        "seconds": r.seconds,
                    }
                    for r in results
                ],
            },
        )
    return 0 if all_passed else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="markov-coder",
        description="Markov-source density modelling: verification and experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run the identity-verification suites")
    p_verify.add_argument("--scope", default="all", choices=SCOPES)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--out", default=None, help="directory for verify_report.json")
    p_verify.add_argument(
        "--config", default=None, help="optional chain fixture JSON to cross-check"
    )

    p_train = sub.add_parser("train", help="train a vq/ladder/topo/pmd stage")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--seed", type=int, default=None, help="override config seed")

    p_eval = sub.add_parser("eval", help="evaluate objectives for a spec file")
    p_eval.add_argument("--kind", required=True, choices=["chain", "skip", "ace", "hm"])
    p_eval.add_argument("--config", required=True, help="spec JSON path")
    p_eval.add_argument("--unit", default="bits", choices=["bits", "nats"])
    p_eval.add_argument("--out", default=None, help="directory for eval_report.json")

    p_synth = sub.add_parser("synth", help="generate synthetic datasets and specs")
    p_synth.add_argument("--config", required=True)
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--seed", type=int, default=None, help="override config seed")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args.scope, args.seed, args.out, args.config)
        if args.command == "train":
            return cmd_train(load_json(args.config, "train config"), args.out, args.seed)
        if args.command == "eval":
            return cmd_eval(args.kind, args.config, args.unit, args.out)
        if args.command == "synth":
            return cmd_synth(load_json(args.config, "synth config"), args.out, args.seed)
        raise AssertionError("unreachable")
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CoderError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
