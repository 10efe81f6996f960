"""Command-line harness for the alignment experiments.

Subcommands: spectra, align, ablate-k, diagnose, compose, synth. Each run
writes into its own output directory (config.json plus command-specific
CSV/JSON); everything except the timestamp in config.json is deterministic
given the inputs and seed. Failures exit nonzero with a stage-tagged
message and leave no partially written reports.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import datetime
import io
import sys
from pathlib import Path

from . import __version__
from .dataio import (
    AnchorSet,
    EmbeddingMatrix,
    PipelineConfig,
    atomic_write_json,
    load_anchor_set,
    load_embeddings,
    sample_anchors,
    write_embeddings,
    write_matrix,
)
from .diagnostics import diagnostics_report
from .pipeline import (
    ALL_METHODS,
    CCA_MIN_ANCHORS,
    chance_recall,
    embedding_basis,
    evaluate_retrieval,
    required_basis_dim,
    solve_alignment,
)
from .retrieval import recall_tables_to_dict
from .synth import RELATIONS, STRUCTURES, gen_base_cloud, gen_pair

DEFAULT_BUDGETS = (5, 10, 20, 50, 100, 500)
DEFAULT_KS_GRID = (10, 20, 30, 50, 70, 100)


class StageError(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _log(msg: str) -> None:
    print(msg, flush=True)


# ---------------------------------------------------------------------------
# argument plumbing


def _parse_zoomout(text: str) -> tuple[int, int, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("--zoomout expects start:max:steps, e.g. 50:100:5")
    try:
        k0, kmax, steps = (int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError("--zoomout parts must be integers") from None
    return k0, kmax, steps


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(",") if p)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated integer list") from None


def _parse_structure(text: str) -> tuple[str, int]:
    name, _, comp = text.partition(":")
    if name not in STRUCTURES:
        raise argparse.ArgumentTypeError(f"structure must be one of {STRUCTURES}")
    return name, int(comp) if comp else 3


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--knn", type=int, default=15, help="kNN graph neighbors (default 15)")
    p.add_argument("--ks", type=int, default=50, help="spectral truncation k_s (default 50)")
    p.add_argument(
        "--zoomout",
        type=_parse_zoomout,
        default=(50, 100, 5),
        metavar="K0:KMAX:STEPS",
        help="refinement schedule (default 50:100:5)",
    )
    p.add_argument("--no-zoomout", action="store_true", help="disable ZoomOut refinement")
    p.add_argument("--lambda-comm", type=float, default=0.1, help="commutativity weight (default 0.1)")
    p.add_argument("--lambda-tik", type=float, default=0.001, help="Tikhonov weight (default 0.001)")
    p.add_argument("--tau-probe", type=float, default=0.1, help="anchor indicator smoothing (default 0.1)")
    p.add_argument("--hks-scales", type=int, default=100, help="HKS probe scales (default 100)")
    p.add_argument("--cutoffs", type=_parse_int_list, default=(1, 5, 10), help="recall cutoffs (default 1,5,10)")
    p.add_argument("--captions-per-image", type=int, default=5, help="equivalent captions per image (default 5)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("binary", "csv"), default="binary", help="embedding file format")
    p.add_argument("--eigensolver", choices=("auto", "dense", "lanczos"), default="auto")
    p.add_argument("--out", required=True, help="output directory for this run")


def _config_from_args(args: argparse.Namespace, use_zoomout: bool) -> PipelineConfig:
    k0, kmax, steps = args.zoomout
    if use_zoomout and k0 != args.ks:
        # refinement starts at the solved dimension; keep the flag honest
        _log(f"note: zoomout start {k0} overridden to k_s={args.ks}")
        k0 = args.ks
    if not use_zoomout:
        k0, kmax = args.ks, args.ks
    return PipelineConfig(
        knn_k=args.knn,
        spectral_dim=args.ks,
        zoomout_start=k0,
        zoomout_max=kmax,
        zoomout_steps=steps,
        lambda_comm=args.lambda_comm,
        lambda_tik=args.lambda_tik,
        probe_smoothing=args.tau_probe,
        hks_num_scales=args.hks_scales,
        recall_cutoffs=args.cutoffs,
        seed=args.seed,
    )


def _prepare_outdir(args: argparse.Namespace, command: str, config: PipelineConfig, extra: dict) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "command": command,
        "version": __version__,
        "config": config.to_dict(),
        "inputs": extra,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    atomic_write_json(doc, out / "config.json")
    return out


def _load_pair(args: argparse.Namespace) -> tuple[EmbeddingMatrix, EmbeddingMatrix]:
    Zv = load_embeddings(args.vision, format=args.format, modality_tag="vision")
    Zt = load_embeddings(args.text, format=args.format, modality_tag="text")
    if Zv.n_points != Zt.n_points:
        raise ValueError(
            f"modalities disagree on n_points: {Zv.n_points} (vision) vs {Zt.n_points} (text)"
        )
    return Zv, Zt


def _anchors_for(args: argparse.Namespace, n_points: int, budget: int, seed: int) -> AnchorSet:
    if getattr(args, "anchor_file", None):
        anchors = load_anchor_set(args.anchor_file, n_points)
        if anchors.budget != budget:
            raise ValueError(
                f"anchor file has {anchors.budget} pairs but the run asked for {budget}"
            )
        return anchors
    return sample_anchors(n_points, budget, seed)


def _write_recall_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns)
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(buf.getvalue())
    tmp.replace(path)


def _recall_rows(method: str, anchors: int, tables, extra: dict | None = None) -> list[dict]:
    rows = []
    for t in tables:
        for k in sorted(t.recalls):
            row = {
                "method": method,
                "anchors": anchors,
                "protocol": t.protocol,
                "direction": t.direction,
                "k": k,
                "recall": repr(t.recalls[k]),
            }
            if extra:
                row.update(extra)
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# subcommands


def cmd_spectra(args: argparse.Namespace) -> int:
    config = _config_from_args(args, use_zoomout=False)
    out = _prepare_outdir(args, "spectra", config, {"vision": args.vision, "text": args.text})
    with stage("load"):
        Zv, Zt = _load_pair(args)
    with stage("spectra"):
        basis_v = embedding_basis(Zv, config.knn_k, config.spectral_dim, args.eigensolver)
        basis_t = embedding_basis(Zt, config.knn_k, config.spectral_dim, args.eigensolver)
    with stage("write"):
        for tag, basis in (("vision", basis_v), ("text", basis_t)):
            write_matrix(basis.values[None, :], out / f"basis_{tag}_values.emb")
            write_matrix(basis.vectors, out / f"basis_{tag}_vectors.emb")
        lines = ["index,lambda_vision,lambda_text,ratio"]
        for i, (lv, lt) in enumerate(zip(basis_v.values, basis_t.values)):
            lines.append(f"{i},{lv!r},{lt!r},{lv / lt!r}")
        (out / "spectra.csv").write_text("\n".join(lines) + "\n")
    _log(
        f"spectra: k_s={config.spectral_dim}, eigenvalue ranges "
        f"vision=[{basis_v.values[0]:.4g}, {basis_v.values[-1]:.4g}] "
        f"text=[{basis_t.values[0]:.4g}, {basis_t.values[-1]:.4g}]"
    )
    return 0


def _run_fmap_cell(Zv, Zt, config, args, budget, bases):
    basis_v, basis_t = bases
    anchor_set = None
    if budget > 0:
        anchor_set = _anchors_for(args, Zv.n_points, budget, config.seed)
    alignment = solve_alignment(
        basis_v, basis_t, config, anchor_set=anchor_set, use_zoomout=not args.no_zoomout
    )
    tables = evaluate_retrieval(
        alignment.retrieval_scores(), config.recall_cutoffs, args.captions_per_image
    )
    # diagnostics follow the map retrieval actually used
    diag_map = alignment.final_map
    k_diag = diag_map.source_dim
    diag = diagnostics_report(
        diag_map,
        basis_v.truncate(k_diag).values,
        basis_t.truncate(k_diag).values,
    )
    return tables, diag


def cmd_align(args: argparse.Namespace) -> int:
    config = _config_from_args(args, use_zoomout=not args.no_zoomout)
    methods = args.methods
    out = _prepare_outdir(
        args,
        "align",
        config,
        {"vision": args.vision, "text": args.text, "methods": list(methods), "budgets": list(args.budgets)},
    )
    with stage("load"):
        Zv, Zt = _load_pair(args)
    bases = None
    if any(m in ("fmap", "fmap_hks") for m in methods):
        with stage("spectra"):
            dim = required_basis_dim(config, not args.no_zoomout)
            bases = (
                embedding_basis(Zv, config.knn_k, dim, args.eigensolver),
                embedding_basis(Zt, config.knn_k, dim, args.eigensolver),
            )

    rows: list[dict] = []
    recall_doc: dict = {}
    diag_doc: dict = {}
    for method in methods:
        budgets = list(args.budgets)
        if method in ("raw_cosine", "fmap_hks"):
            budgets = [0]  # anchor-free methods run once
        for budget in budgets:
            if method == "cca" and budget < CCA_MIN_ANCHORS:
                _log(f"align: skipping cca at |S|={budget} (insufficient anchors)")
                continue
            with stage(f"{method}|S|={budget}"):
                if method in ("fmap", "fmap_hks"):
                    tables, diag = _run_fmap_cell(Zv, Zt, config, args, budget, bases)
                    diag_doc[str(budget)] = diag.to_dict()
                else:
                    anchor_set = _anchors_for(args, Zv.n_points, budget, config.seed)
                    scores = baseline_scores_cli(method, Zv, Zt, anchor_set, args)
                    tables = evaluate_retrieval(scores, config.recall_cutoffs, args.captions_per_image)
            rows.extend(_recall_rows(method, budget, tables))
            recall_doc.setdefault(method, {})[str(budget)] = recall_tables_to_dict(tables)
            r1 = next(t for t in tables if t.protocol == "caption_space" and t.direction == "i2t")
            _log(f"align: {method} |S|={budget} i2t R@1={r1.recalls[min(r1.recalls)]:.2f}%")

    with stage("write"):
        _write_recall_csv(
            out / "recall.csv", rows, ["method", "anchors", "protocol", "direction", "k", "recall"]
        )
        atomic_write_json({"config": config.to_dict(), "recall": recall_doc}, out / "recall.json")
        if diag_doc:
            atomic_write_json({"config": config.to_dict(), "diagnostics": diag_doc}, out / "diagnostics.json")
    return 0


def baseline_scores_cli(method, Zv, Zt, anchor_set, args):
    from .pipeline import baseline_scores

    return baseline_scores(
        method,
        Zv,
        Zt,
        anchor_set,
        cca_components=args.cca_components,
        cca_ridge=args.cca_ridge,
    )


def cmd_ablate_k(args: argparse.Namespace) -> int:
    base_config = _config_from_args(args, use_zoomout=False)
    out = _prepare_outdir(
        args,
        "ablate-k",
        base_config,
        {"vision": args.vision, "text": args.text, "ks_grid": list(args.ks_grid), "anchors": args.anchors},
    )
    with stage("load"):
        Zv, Zt = _load_pair(args)
    k_top = max(args.ks_grid)
    with stage("spectra"):
        basis_v = embedding_basis(Zv, base_config.knn_k, k_top, args.eigensolver)
        basis_t = embedding_basis(Zt, base_config.knn_k, k_top, args.eigensolver)
    anchor_set = _anchors_for(args, Zv.n_points, args.anchors, base_config.seed)

    rows: list[dict] = []
    recall_doc: dict = {}
    for k_s in args.ks_grid:
        with stage(f"fmap k_s={k_s}"):
            config = PipelineConfig(
                knn_k=base_config.knn_k,
                spectral_dim=k_s,
                zoomout_start=k_s,
                zoomout_max=k_s,
                zoomout_steps=1,
                lambda_comm=base_config.lambda_comm,
                lambda_tik=base_config.lambda_tik,
                probe_smoothing=base_config.probe_smoothing,
                hks_num_scales=base_config.hks_num_scales,
                recall_cutoffs=base_config.recall_cutoffs,
                seed=base_config.seed,
            )
            alignment = solve_alignment(
                basis_v, basis_t, config, anchor_set=anchor_set, use_zoomout=False
            )
            tables = evaluate_retrieval(
                alignment.retrieval_scores(), config.recall_cutoffs, args.captions_per_image
            )
        rows.extend(_recall_rows("fmap", args.anchors, tables, extra={"ks": k_s}))
        recall_doc[str(k_s)] = recall_tables_to_dict(tables)
        r1 = next(t for t in tables if t.protocol == "caption_space" and t.direction == "i2t")
        _log(f"ablate-k: k_s={k_s} i2t R@1={r1.recalls[min(r1.recalls)]:.2f}%")

    with stage("write"):
        _write_recall_csv(
            out / "recall.csv",
            rows,
            ["method", "ks", "anchors", "protocol", "direction", "k", "recall"],
        )
        atomic_write_json({"config": base_config.to_dict(), "recall": recall_doc}, out / "recall.json")
    return 0


def cmd_diagnose(args: argparse.Namespace) -> int:
    # Diagnostics describe the raw solved map: refinement re-projects onto
    # the orthogonal group and would erase exactly the signal being measured.
    config = _config_from_args(args, use_zoomout=False)
    out = _prepare_outdir(
        args, "diagnose", config, {"vision": args.vision, "text": args.text, "anchors": args.anchors}
    )
    with stage("load"):
        Zv, Zt = _load_pair(args)
    with stage("spectra"):
        basis_v = embedding_basis(Zv, config.knn_k, config.spectral_dim, args.eigensolver)
        basis_t = embedding_basis(Zt, config.knn_k, config.spectral_dim, args.eigensolver)
    with stage("solve"):
        anchor_set = None
        if args.anchors > 0:
            anchor_set = _anchors_for(args, Zv.n_points, args.anchors, config.seed)
        alignment = solve_alignment(basis_v, basis_t, config, anchor_set=anchor_set, use_zoomout=False)
        report = diagnostics_report(alignment.raw_map, basis_v.values, basis_t.values)
    with stage("write"):
        atomic_write_json(
            {"config": config.to_dict(), "diagnostics": report.to_dict()}, out / "diagnostics.json"
        )
        lines = ["index,lambda_vision,lambda_text,ratio,diag_dominance"]
        for i in range(config.spectral_dim):
            lv, lt = basis_v.values[i], basis_t.values[i]
            lines.append(f"{i},{lv!r},{lt!r},{lv / lt!r},{report.diag_dominance[i]!r}")
        (out / "diagnostics.csv").write_text("\n".join(lines) + "\n")
    _log(
        "diagnose: "
        f"d_spec={report.spectral_distance:.4g} "
        f"rho_mean={report.diag_dominance_mean:.4g} "
        f"eps_orth={report.orthogonality_error:.4g}"
    )
    return 0


def cmd_compose(args: argparse.Namespace) -> int:
    from .fmap import compose
    from .retrieval import spectral_scores

    config = _config_from_args(args, use_zoomout=not args.no_zoomout)
    out = _prepare_outdir(
        args,
        "compose",
        config,
        {"emb_a": args.emb_a, "emb_b": args.emb_b, "emb_c": args.emb_c, "anchors": args.anchors},
    )
    with stage("load"):
        Za = load_embeddings(args.emb_a, format=args.format, modality_tag="a")
        Zb = load_embeddings(args.emb_b, format=args.format, modality_tag="b")
        Zc = load_embeddings(args.emb_c, format=args.format, modality_tag="c")
        if not (Za.n_points == Zb.n_points == Zc.n_points):
            raise ValueError("all three embedding sets must share n_points")
    n = Za.n_points
    use_zoomout = not args.no_zoomout
    with stage("spectra"):
        dim = required_basis_dim(config, use_zoomout)
        bases = {
            tag: embedding_basis(Z, config.knn_k, dim, args.eigensolver)
            for tag, Z in (("a", Za), ("b", Zb), ("c", Zc))
        }
    with stage("solve"):
        # independent anchor draws per hop; the direct map gets its own draw
        hops = {
            "ab": (bases["a"], bases["b"], config.seed),
            "bc": (bases["b"], bases["c"], config.seed + 1),
            "ac": (bases["a"], bases["c"], config.seed + 2),
        }
        maps = {}
        for name, (bs, bt, seed) in hops.items():
            anchor_set = sample_anchors(n, args.anchors, seed)
            maps[name] = solve_alignment(
                bs, bt, config, anchor_set=anchor_set, use_zoomout=use_zoomout
            ).final_map
        composed = compose(maps["ab"], maps["bc"])
    with stage("evaluate"):
        k = composed.source_dim
        basis_a, basis_c = bases["a"].truncate(k), bases["c"].truncate(k)
        results = {
            "composed": evaluate_retrieval(
                spectral_scores(composed, basis_a, basis_c), config.recall_cutoffs, args.captions_per_image
            ),
            "direct": evaluate_retrieval(
                spectral_scores(maps["ac"], basis_a, basis_c), config.recall_cutoffs, args.captions_per_image
            ),
        }
    with stage("write"):
        rows: list[dict] = []
        recall_doc: dict = {}
        for name, tables in results.items():
            rows.extend(_recall_rows(name, args.anchors, tables))
            recall_doc[name] = recall_tables_to_dict(tables)
        chance = chance_recall(n, config.recall_cutoffs)
        for k_cut, val in chance.items():
            rows.append(
                {
                    "method": "random",
                    "anchors": 0,
                    "protocol": "image_space",
                    "direction": "i2t",
                    "k": k_cut,
                    "recall": repr(val),
                }
            )
        recall_doc["random"] = {"image_space": {"i2t": {str(k): v for k, v in chance.items()}}}
        _write_recall_csv(
            out / "compose.csv", rows, ["method", "anchors", "protocol", "direction", "k", "recall"]
        )
        atomic_write_json({"config": config.to_dict(), "recall": recall_doc}, out / "compose.json")
    for name in ("composed", "direct"):
        t = next(t for t in results[name] if t.protocol == "caption_space" and t.direction == "i2t")
        _log(f"compose: {name} i2t R@1={t.recalls[min(t.recalls)]:.2f}%")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    config = _config_from_args(args, use_zoomout=False)
    out = _prepare_outdir(
        args,
        "synth",
        config,
        {
            "n": args.n,
            "d": args.d,
            "structure": f"{args.structure[0]}:{args.structure[1]}",
            "relation": args.relation,
            "sigma": args.sigma,
        },
    )
    with stage("generate"):
        name, components = args.structure
        base = gen_base_cloud(
            args.n, args.d, name, components=components, seed=args.seed, knn_k=args.knn
        )
        pair = gen_pair(
            base,
            args.relation,
            noise=args.sigma,
            seed=args.seed,
            structure=name,
            components=components,
        )
    with stage("write"):
        write_embeddings(pair.source, out / "source.emb")
        write_embeddings(pair.target, out / "target.emb")
        meta = {
            "relation": pair.relation,
            "seed": pair.seed,
            "noise": pair.noise,
            "n": args.n,
            "d": args.d,
            "structure": f"{name}:{components}",
            "has_planted_transform": pair.planted_transform is not None,
        }
        atomic_write_json(meta, out / "pair.json")
        if pair.planted_transform is not None:
            write_matrix(pair.planted_transform, out / "planted_transform.emb")
    _log(f"synth: wrote {args.relation} pair (n={args.n}, d={args.d}) to {out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specalign",
        description="Spectral bases, functional maps, and compatibility diagnostics "
        "for cross-modal embedding spaces",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectra", help="eigenvalue spectra and basis dumps for a modality pair")
    p.add_argument("--vision", required=True)
    p.add_argument("--text", required=True)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_spectra)

    p = sub.add_parser("align", help="retrieval comparison over methods and anchor budgets")
    p.add_argument("--vision", required=True)
    p.add_argument("--text", required=True)
    p.add_argument(
        "--methods",
        type=lambda s: tuple(s.split(",")),
        default=("fmap",),
        help=f"comma-separated subset of {ALL_METHODS}",
    )
    p.add_argument("--budgets", type=_parse_int_list, default=DEFAULT_BUDGETS)
    p.add_argument("--anchor-file", default=None, help="explicit anchor CSV instead of sampling")
    p.add_argument("--cca-components", type=int, default=None)
    p.add_argument("--cca-ridge", type=float, default=1e-3)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("ablate-k", help="spectral dimension sweep (ZoomOut disabled)")
    p.add_argument("--vision", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--ks-grid", type=_parse_int_list, default=DEFAULT_KS_GRID)
    p.add_argument("--anchors", type=int, default=50)
    p.add_argument("--anchor-file", default=None)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_ablate_k)

    p = sub.add_parser("diagnose", help="spectral compatibility diagnostics of the raw map")
    p.add_argument("--vision", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--anchors", type=int, default=50, help="anchor budget (0 = unsupervised HKS)")
    p.add_argument("--anchor-file", default=None)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("compose", help="composed vs direct map across three embedding sets")
    p.add_argument("--emb-a", required=True)
    p.add_argument("--emb-b", required=True)
    p.add_argument("--emb-c", required=True)
    p.add_argument("--anchors", type=int, default=20)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("synth", help="generate a synthetic modality pair with known ground truth")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--structure", type=_parse_structure, default=("gaussian_mixture", 3))
    p.add_argument("--relation", choices=RELATIONS, default="isometric_noisy")
    p.add_argument("--sigma", type=float, default=0.01, help="noise scale for isometric_noisy")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error [cli] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
