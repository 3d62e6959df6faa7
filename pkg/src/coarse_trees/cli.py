"""Command line: ``validate``, ``build``, ``verify``, ``export``, ``report``.

Exit status 0 means every certificate passed, 1 means some certificate
failed (witnesses are printed), 2 means the input could not be read.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path

from .covers import GENERATORS, default_scales, empirical_control_function, natural_colors
from .embedding import (
    DEFAULT_SAMPLE,
    DistortionReport,
    PairSource,
    analytic_h,
    build_embedding,
    check_map,
    pair_data,
    verify_expansive,
    verify_proper,
)
from .errors import CoarseTreesError, FormatError, MetricError, MissingCoordinates
from .forest import build_forest, validate_forest
from .growth import GrowthProfile, LinearControl, StepControl
from .io import (
    atomic_write,
    forest_from_dict,
    forest_to_dict,
    load_space,
    profile_from_dict,
    map_from_dict,
    map_to_dict,
    read_structured,
    report_from_dict,
    report_to_dict,
    to_jsonable,
    tower_from_dict,
    tower_to_dict,
    tree_to_dot,
    write_structured,
)
from .metric import as_rational, format_rational
from .tower import build_tower, certify_levels, certify_property1, certify_property2, certify_psi_defined

OK, FAIL, BAD_INPUT = 0, 1, 2


@dataclass
class PipelineConfig:
    space: str
    generator: str = "interval"
    fprime: str = "linear:2:0"
    growth_constant: str = "100"
    g0: str = "2"
    colors: int | None = None
    basepoint: int = 0
    pairs: str = "auto"
    seed: int = 0

    def validate(self) -> None:
        if self.generator not in GENERATORS:
            raise FormatError(f"unknown generator {self.generator!r} (choose from {', '.join(GENERATORS)})")
        if self.colors is not None and self.colors < 1:
            raise FormatError("--colors must be at least 1")
        self.pair_source()

    def pair_source(self) -> PairSource:
        if self.pairs in ("auto", "exhaustive"):
            return PairSource(self.pairs, DEFAULT_SAMPLE, self.seed)
        try:
            size = int(self.pairs)
        except ValueError as e:
            raise FormatError(f"--pairs must be auto, exhaustive or a sample size, not {self.pairs!r}") from e
        return PairSource("sample", size, self.seed)


def make_profile(cfg: PipelineConfig, space, generator) -> GrowthProfile:
    kind, *args = cfg.fprime.split(":")
    try:
        if kind == "linear":
            a = as_rational(args[0]) if args else 2
            b = as_rational(args[1]) if len(args) > 1 else 0
            fp = LinearControl(a, b)
        elif kind == "empirical" and not args:
            table = empirical_control_function(space, generator, default_scales(space))
            fp = StepControl(tuple(table), space.diameter)
        else:
            raise ValueError(cfg.fprime)
        return GrowthProfile(fp, as_rational(cfg.growth_constant), as_rational(cfg.g0))
    except (ValueError, ZeroDivisionError) as e:
        raise FormatError(f"bad --fprime/--growth-constant: {e}") from e


def _say(line: str) -> None:
    print(line, flush=True)


def _witness(w) -> str:
    return json.dumps(to_jsonable(w), separators=(",", ":"))


# commands ---------------------------------------------------------------------


def cmd_validate(space_source: str) -> int:
    try:
        space = load_space(space_source)
    except MetricError as e:
        _say(f"INVALID {type(e).__name__}: {e} witness={_witness(e.witness)}")
        return FAIL
    _say(f"VALID {space.n} points, diameter {format_rational(space.diameter)}")
    return OK


def cmd_build(cfg: PipelineConfig, out: Path) -> int:
    cfg.validate()
    space = load_space(cfg.space)
    gen = GENERATORS[cfg.generator]
    colors = cfg.colors or natural_colors(cfg.generator, space)
    if not 0 <= cfg.basepoint < space.n:
        raise FormatError(f"basepoint {cfg.basepoint} out of range")
    profile = make_profile(cfg, space, gen)
    cfg.colors = colors
    write_structured(out / "config.json", "config", asdict(cfg))
    try:
        tower = build_tower(space, gen, profile, colors, cfg.basepoint)
    except MissingCoordinates as e:
        raise FormatError(f"generator {cfg.generator!r} cannot cover {cfg.space}: {e}") from e
    except CoarseTreesError as e:
        _say(f"FAIL build level {e.level}: {type(e).__name__}: {e} witness={_witness(e.witness)}")
        return FAIL
    ok = True
    for k, cert in enumerate(certify_levels(tower)):
        ok &= cert.passed
        if not cert.passed:
            _say(f"FAIL level {k} cover: witness={_witness(cert.witness())}")
    _say(f"{'PASS' if ok else 'FAIL'} level covers: {len(tower.levels)} levels, height {tower.height}")
    for cert in (certify_property1(tower), certify_property2(tower), certify_psi_defined(tower)):
        ok &= cert.passed
        line = f"{'PASS' if cert.passed else 'FAIL'} {cert.name}: {cert.checked} checked, {cert.violations} violations"
        if cert.witness:
            line += f" witness={_witness(cert.witness)}"
        _say(line)
    forest = build_forest(tower, check=False)
    for tc in validate_forest(forest):
        ok &= tc.passed
        status = "PASS" if tc.passed else "FAIL"
        line = f"{status} tree {tc.color}: {tc.vertices} vertices, {tc.edges} edges, {tc.components} component(s)"
        if tc.witness:
            line += f" witness={_witness(tc.witness)}"
        _say(line)
    write_structured(out / "tower.json", "tower", tower_to_dict(tower))
    write_structured(out / "forest.json", "forest", forest_to_dict(forest))
    if not ok:
        return FAIL
    emb = build_embedding(tower, forest)
    write_structured(out / "map.json", "map", map_to_dict(emb))
    return OK


def load_built(out: Path):
    cfg = PipelineConfig(**read_structured(out / "config.json", "config"))
    space = load_space(cfg.space)
    tower = tower_from_dict(read_structured(out / "tower.json", "tower"), space)
    forest = forest_from_dict(read_structured(out / "forest.json", "forest"), tower)
    emb = map_from_dict(read_structured(out / "map.json", "map"), tower, forest)
    return cfg, tower, forest, emb


def cmd_verify(out: Path, pairs: str | None = None, seed: int | None = None) -> int:
    cfg, tower, forest, emb = load_built(out)
    if pairs is not None:
        cfg.pairs = pairs
    if seed is not None:
        cfg.seed = seed
    source = cfg.pair_source()
    map_violations = check_map(emb)
    if any(v["reason"] == "phi names no vertex" for v in map_violations):
        # out-of-range vertex ids cannot be measured at all
        report = DistortionReport(tower.space.denominator, tower.num_colors)
        report.map_violations = map_violations
        write_structured(out / "report.json", "report", report_to_dict(report))
        _say(f"FAIL map consistency: {len(map_violations)} violations")
        _say(f"  witness={_witness(map_violations[0])}")
        return FAIL
    pd = pair_data(emb, source)
    report = verify_expansive(emb, pd)
    verify_proper(emb, tower.profile, pd, report)
    report.map_violations = map_violations
    write_structured(out / "report.json", "report", report_to_dict(report))
    rows = ["x\ty\td_X\td_prod"]
    space = tower.space
    for x, y, d, k in zip(pd.i.tolist(), pd.j.tolist(), pd.d_x.tolist(), pd.d_prod.tolist()):
        rows.append(f"{x}\t{y}\t{format_rational(space.to_rational(d))}\t{k}")
    atomic_write(out / "pairs.tsv", "\n".join(rows) + "\n")
    _say(
        f"{'PASS' if report.expansive else 'FAIL'} expansive: {report.pairs_checked} pairs, "
        f"max margin {format_rational(report.expansive_margin)} against 2 d_X + 4"
    )
    if report.expansive_witnesses:
        _say(f"  witness={_witness(report.expansive_witnesses[0])}")
    _say(
        f"{'PASS' if report.proper else 'FAIL'} proper: {report.num_proper_violations} bound violations, "
        f"{len(report.h_violations)} h-envelope violations"
    )
    if report.proper_violations:
        _say(f"  witness={_witness(report.proper_violations[0])}")
    _say(f"{'FAIL' if map_violations else 'PASS'} map consistency: {len(map_violations)} violations")
    if map_violations:
        _say(f"  witness={_witness(map_violations[0])}")
    return OK if report.passed else FAIL


def cmd_export(out: Path, fmt: str = "all") -> int:
    cfg = PipelineConfig(**read_structured(out / "config.json", "config"))
    space = load_space(cfg.space)
    tower = tower_from_dict(read_structured(out / "tower.json", "tower"), space)
    forest = forest_from_dict(read_structured(out / "forest.json", "forest"), tower)
    if fmt in ("dot", "all"):
        for tree in forest.trees:
            atomic_write(out / "export" / f"tree_{tree.color}.dot", tree_to_dot(tree))
    if fmt in ("json", "all"):
        write_structured(out / "export" / "forest.json", "forest", forest_to_dict(forest))
    _say(f"exported {len(forest.trees)} tree(s) to {out / 'export'}")
    return OK


def cmd_report(out: Path) -> int:
    cfg = PipelineConfig(**read_structured(out / "config.json", "config"))
    report = report_from_dict(read_structured(out / "report.json", "report"))
    tower_d = read_structured(out / "tower.json", "tower")
    profile = profile_from_dict(tower_d["profile"])
    rho = report.empirical_rho()
    delta = report.empirical_delta()
    rows = ["t\trho\tdelta\th\tlinear_bound"]
    for (t, r), (_, d) in zip(rho, delta):
        h = analytic_h(profile, report.num_colors, t)
        rows.append(f"{format_rational(t)}\t{r}\t{d}\t{h}\t{format_rational(2 * Fraction(t) + 4)}")
    table = "\n".join(rows) + "\n"
    atomic_write(out / "envelope.tsv", table)
    _say(f"space {cfg.space}, {report.num_colors} colors, {report.pairs_checked} pairs ({report.sampling.get('mode')})")
    _say(f"expansive={report.expansive} proper={report.proper} map_ok={not report.map_violations}")
    sys.stdout.write(table)
    return OK if report.passed else FAIL


# argument parsing ---------------------------------------------------------------


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--space", required=True, help="matrix:FILE, edges:FILE, singleton, path:m, grid:m:d, random-graph:m:p:seed")
    p.add_argument("--generator", default="interval", choices=sorted(GENERATORS))
    p.add_argument("--fprime", default="linear:2:0", help="linear:a[:b] or empirical")
    p.add_argument("--growth-constant", default="100")
    p.add_argument("--colors", type=int, default=None)
    p.add_argument("--basepoint", type=int, default=0)
    p.add_argument("--pairs", default="auto", help="auto, exhaustive or a sample size")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coarse-trees", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check that a space is a finite metric space")
    p.add_argument("--space", required=True)

    p = sub.add_parser("build", help="build tower, trees and map; print certificates")
    _add_pipeline_flags(p)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("verify", help="check expansiveness and properness of a built map")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--pairs", default=None)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("export", help="write trees as DOT and structured files")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--format", default="all", choices=["dot", "json", "all"])

    p = sub.add_parser("report", help="tabulate the distortion envelopes of a verified map")
    p.add_argument("--out", required=True, type=Path)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(args.space)
        if args.command == "build":
            cfg = PipelineConfig(
                space=args.space,
                generator=args.generator,
                fprime=args.fprime,
                growth_constant=args.growth_constant,
                colors=args.colors,
                basepoint=args.basepoint,
                pairs=args.pairs,
                seed=args.seed,
            )
            return cmd_build(cfg, args.out)
        if args.command == "verify":
            return cmd_verify(args.out, args.pairs, args.seed)
        if args.command == "export":
            return cmd_export(args.out, args.format)
        if args.command == "report":
            return cmd_report(args.out)
    except MetricError as e:
        _say(f"INVALID {type(e).__name__}: {e} witness={_witness(e.witness)}")
        return FAIL
    except (FormatError, KeyError, TypeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return BAD_INPUT
    return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
