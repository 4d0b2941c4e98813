"""
Command-line driver for EVI-GP experiments

Subcommands:
    fit        fit one model and write its artifacts
    predict    predict at query points from a saved fit
    benchmark  replicate a benchmark study and report standardized RMSPE
    select     cross-validate nu, select mean terms, refit the reduced model
    cv-nu      cross-validation curve for the shrinkage scale nu

Exit codes: 0 success, 1 numerical failure, 2 usage or configuration error.
"""

import argparse
import copy
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

import config
from evigp import (
    BasisSpec,
    Dataset,
    EviConfig,
    EVIGPError,
    FitResult,
    HyperPoint,
    Informative,
    InvalidArgumentError,
    NonInformative,
    NumericalError,
    ParticleEnsemble,
    PriorConfig,
    ResponseScale,
    attach_conditionals,
    beta_intervals,
    build_basis,
    cv_select_nu,
    design_matrix,
    fit_gp,
    get_benchmark,
    make_dataset,
    maximin_lhs,
    predict_aggregate,
    random_lhs,
    sample_posterior,
    select_terms,
    standardized_rmspe,
    summarize,
)
from utils import (
    calculate_processing_time,
    load_matrix_csv,
    sanitize_filename,
    save_matrix_csv,
    write_json,
    write_rows_csv,
)

logger = logging.getLogger("evigp.cli")

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2

FIT_FILE = "fit.json"
TRAIN_FILE = "train.csv"
PARTICLES_FILE = "particles.csv"


def _default_out(benchmark: Optional[str], dataset: Optional[str]) -> Path:
    label = benchmark or (Path(dataset).stem if dataset else "run")
    return config.OUTPUT_DIR / sanitize_filename(label.lower())


@dataclass
class ExperimentConfig:
    """Everything one CLI run needs; benchmark defaults fill unset keys."""

    benchmark: Optional[str] = None
    dataset: Optional[Path] = None
    test_dataset: Optional[Path] = None
    degree: int = 0
    active_terms: Optional[List[str]] = None
    prior: Dict[str, Any] = field(default_factory=dict)
    method: str = "post"
    N: int = 100
    h: float = 0.02
    step_size: float = 1.0
    init_box: Optional[List[List[float]]] = None
    evi: EviConfig = field(default_factory=EviConfig)
    reps: int = 1
    n_train: int = 11
    n_test: int = 100
    test_design: str = "maximin"
    maximin_restarts: int = config.MAXIMIN_RESTARTS
    noiseless_test: bool = False
    standardize: bool = True
    nu_grid: List[float] = field(default_factory=lambda: list(config.NU_GRID))
    folds: int = config.CV_FOLDS
    level: float = config.CI_LEVEL
    draws: int = 10
    seed: int = config.DEFAULT_SEED
    out: Path = config.OUTPUT_DIR
    threads: int = config.DEFAULT_THREADS

    @classmethod
    def from_mapping(cls, data: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> "ExperimentConfig":
        """
        Build a config from a parsed experiment file plus CLI overrides

        Args:
            data: Mapping from the JSON experiment file
            overrides: Flag values; None entries are ignored

        Raises:
            InvalidArgumentError: unknown keys, invalid values or a missing
                dataset file
        """
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgumentError(f"Unknown configuration keys: {', '.join(sorted(unknown))}")

        merged: Dict[str, Any] = {}
        benchmark = (overrides or {}).get("benchmark") or data.get("benchmark")
        if benchmark is not None:
            get_benchmark(benchmark)
            merged.update(copy.deepcopy(config.BENCHMARK_DEFAULTS[benchmark.lower()]))
        base_prior = merged.get("prior", {})
        merged.update(data)
        merged["prior"] = {**base_prior, **data.get("prior", {})}
        merged["evi"] = {**config.EVI_DEFAULTS, **data.get("evi", {})}
        for key, value in (overrides or {}).items():
            if value is not None:
                merged[key] = value

        try:
            cfg = cls(
                benchmark=benchmark.lower() if benchmark else None,
                dataset=Path(merged["dataset"]) if merged.get("dataset") else None,
                test_dataset=Path(merged["test_dataset"]) if merged.get("test_dataset") else None,
                degree=int(merged.get("degree", 0)),
                active_terms=merged.get("active_terms"),
                prior=dict(merged["prior"]),
                method=str(merged.get("method", "post")),
                N=int(merged.get("N", 100)),
                h=float(merged.get("h", 0.02)),
                step_size=float(merged.get("step_size", 1.0)),
                init_box=merged.get("init_box"),
                evi=EviConfig(**merged["evi"]),
                reps=int(merged.get("reps", 1)),
                n_train=int(merged.get("n_train", 11)),
                n_test=int(merged.get("n_test", 100)),
                test_design=str(merged.get("test_design", "maximin")),
                maximin_restarts=int(merged.get("maximin_restarts", config.MAXIMIN_RESTARTS)),
                noiseless_test=bool(merged.get("noiseless_test", False)),
                standardize=bool(merged.get("standardize", True)),
                nu_grid=[float(v) for v in merged.get("nu_grid", config.NU_GRID)],
                folds=int(merged.get("folds", config.CV_FOLDS)),
                level=float(merged.get("level", config.CI_LEVEL)),
                draws=int(merged.get("draws", 10)),
                seed=int(merged.get("seed", config.DEFAULT_SEED)),
                out=Path(merged["out"]) if merged.get("out") else _default_out(benchmark, merged.get("dataset")),
                threads=int(merged.get("threads", config.DEFAULT_THREADS)),
            )
        except (TypeError, ValueError) as e:
            raise InvalidArgumentError(f"Invalid configuration: {str(e)}") from e
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.benchmark is None and self.dataset is None:
            raise InvalidArgumentError("Configuration needs a benchmark name or a dataset path")
        for path in (self.dataset, self.test_dataset):
            if path is not None and not path.exists():
                raise InvalidArgumentError(f"Dataset file not found: {path}")
        if self.method not in ("post", "map"):
            raise InvalidArgumentError(f"method must be 'post' or 'map', got {self.method}")
        if self.test_design not in ("maximin", "lhs"):
            raise InvalidArgumentError(f"test_design must be 'maximin' or 'lhs', got {self.test_design}")
        if self.degree not in (0, 1, 2):
            raise InvalidArgumentError(f"degree must be 0, 1 or 2, got {self.degree}")
        if min(self.N, self.reps, self.n_train, self.n_test, self.threads, self.draws) < 1:
            raise InvalidArgumentError("N, reps, n_train, n_test, threads and draws must be >= 1")
        if not (self.h > 0 and self.step_size > 0):
            raise InvalidArgumentError("h and step_size must be positive")

    @property
    def informative(self) -> bool:
        return str(self.prior.get("beta_prior", "noninformative")).lower() == "informative"

    def prior_config(self, d: int, nu: Optional[float] = None) -> PriorConfig:
        """PriorConfig for input dimension d; nu overrides the configured shrinkage scale."""
        p = self.prior

        def per_dim(key: str, default: float):
            value = p.get(key, default)
            if isinstance(value, (list, tuple)):
                if len(value) != d:
                    raise InvalidArgumentError(f"prior.{key} has {len(value)} entries for d={d}")
                return tuple(float(v) for v in value)
            return float(value)

        if self.informative:
            nu = nu if nu is not None else p.get("nu")
            if nu is None:
                raise InvalidArgumentError("Informative prior needs prior.nu")
            beta_prior = Informative(nu2=float(nu) ** 2, r=float(p.get("r", 1.0 / 3.0)))
        else:
            beta_prior = NonInformative()
        return PriorConfig(
            a_omega=per_dim("a_omega", 1.0),
            b_omega=per_dim("b_omega", 0.5),
            a_eta=float(p.get("a_eta", 1.0)),
            b_eta=float(p.get("b_eta", 0.5)),
            df_tau2=float(p.get("df_tau2", 0.0)),
            beta_prior=beta_prior,
            jitter=float(p.get("jitter", 1e-10)),
        )

    def init_box_for(self, d: int) -> Optional[List[List[float]]]:
        if self.init_box is None:
            return None
        box = [list(map(float, b)) for b in self.init_box]
        if self.informative and len(box) == d + 1:
            box.append(list(config.TAU2_INIT_RANGE))
        return box

    def basis_for(self, d: int) -> BasisSpec:
        basis = build_basis(d, self.degree)
        if self.active_terms:
            labels = basis.all_labels
            missing = set(self.active_terms) - set(labels)
            if missing:
                raise InvalidArgumentError(f"Unknown mean terms: {', '.join(sorted(missing))}")
            basis = basis.with_mask([lab == "1" or lab in self.active_terms for lab in labels])
        return basis

    def to_mapping(self) -> Dict[str, Any]:
        data = asdict(self)
        data["evi"] = asdict(self.evi)
        for key in ("dataset", "test_dataset", "out"):
            data[key] = str(data[key]) if data[key] is not None else None
        return data


def load_config(path: Optional[Path], overrides: Dict[str, Any]) -> ExperimentConfig:
    data: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise InvalidArgumentError(f"Config file not found: {path}")
        try:
            with open(path) as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise InvalidArgumentError(f"{path}: invalid JSON: {str(e)}") from e
    return ExperimentConfig.from_mapping(data, overrides)


# ---------------------------------------------------------------------------
# data and artifacts
# ---------------------------------------------------------------------------

def _design(n: int, d: int, seed: int, kind: str, restarts: int):
    if kind == "lhs" or n < 2:
        return random_lhs(n, d, seed)
    return maximin_lhs(n, d, seed, restarts=restarts)


def generate_data(cfg: ExperimentConfig, seed: int) -> Tuple[Dataset, Dataset]:
    """Fresh training and test sets for one replication of a benchmark."""
    spec = get_benchmark(cfg.benchmark)
    rng = np.random.default_rng(seed)
    train_seed, test_seed = (int(s) for s in rng.integers(0, 2**31 - 1, size=2))
    train_design = _design(cfg.n_train, spec.d, train_seed, "maximin", cfg.maximin_restarts)
    test_design = _design(cfg.n_test, spec.d, test_seed, cfg.test_design, cfg.maximin_restarts)
    train = make_dataset(spec, train_design, rng)
    test = make_dataset(spec, test_design, rng, noiseless=cfg.noiseless_test)
    return train, test


def training_data(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset is not None:
        return Dataset.from_csv(cfg.dataset)
    return generate_data(cfg, cfg.seed)[0]


def _prior_to_dict(prior: PriorConfig) -> Dict[str, Any]:
    data = {
        "a_omega": np.atleast_1d(prior.a_omega).tolist(),
        "b_omega": np.atleast_1d(prior.b_omega).tolist(),
        "a_eta": prior.a_eta,
        "b_eta": prior.b_eta,
        "df_tau2": prior.df_tau2,
        "jitter": prior.jitter,
        "beta_prior": "informative" if prior.informative else "noninformative",
    }
    if prior.informative:
        data.update(nu2=prior.beta_prior.nu2, r=prior.beta_prior.r)
    return data


def _prior_from_dict(data: Dict[str, Any]) -> PriorConfig:
    if data["beta_prior"] == "informative":
        beta_prior = Informative(nu2=float(data["nu2"]), r=float(data["r"]))
    else:
        beta_prior = NonInformative()
    return PriorConfig(
        a_omega=tuple(data["a_omega"]),
        b_omega=tuple(data["b_omega"]),
        a_eta=float(data["a_eta"]),
        b_eta=float(data["b_eta"]),
        df_tau2=float(data["df_tau2"]),
        beta_prior=beta_prior,
        jitter=float(data["jitter"]),
    )


def _coordinate_names(d: int, informative: bool) -> List[str]:
    names = [f"log_omega{j + 1}" for j in range(d)] + ["log_eta"]
    return names + ["log_tau2"] if informative else names


def save_fit(fit: FitResult, out: Path, cfg: ExperimentConfig) -> Path:
    """
    Write fit.json, train.csv, particles.csv, energy_trace.csv,
    beta_intervals.csv and beta_draws.csv into `out`
    """
    out.mkdir(parents=True, exist_ok=True)
    d = fit.dataset.d
    fit.training_data().to_csv(out / TRAIN_FILE)

    points = np.array([pt.to_vector() for pt in fit.points])
    save_matrix_csv(out / PARTICLES_FILE, points, _coordinate_names(d, fit.prior.informative))
    write_rows_csv(
        out / "energy_trace.csv",
        ({"epoch": i, "energy": v} for i, v in enumerate(fit.energy_trace)),
        ["epoch", "energy"],
    )

    intervals = beta_intervals(fit, level=cfg.level, rng=np.random.default_rng(cfg.seed))
    write_interval_report(out / "beta_intervals.csv", intervals)

    draws = sample_posterior(fit, cfg.draws, np.random.default_rng(cfg.seed + 1))
    labels = list(fit.basis.labels)
    save_matrix_csv(
        out / "beta_draws.csv",
        np.column_stack([draws.particle, draws.tau2, draws.beta]),
        ["particle", "tau2"] + [f"beta[{lab}]" for lab in labels],
    )

    first = fit.beta_conditionals[0]
    tau2_hat = [t.scale for t in fit.tau2_conditionals] if fit.tau2_conditionals else None
    payload = {
        "method": fit.method,
        "status": fit.status,
        "aborted": fit.aborted,
        "d": d,
        "degree": fit.basis.degree,
        "active_mask": list(fit.basis.active_mask),
        "labels": labels,
        "prior": _prior_to_dict(fit.prior),
        "h": fit.ensemble.h if fit.ensemble is not None else cfg.h,
        "step_size": fit.ensemble.step_size if fit.ensemble is not None else cfg.step_size,
        "mode": fit.mode.to_vector() if fit.mode is not None else None,
        "beta_hat": first.beta_hat if fit.method == "map" else np.mean(
            [c.beta_hat for c in fit.beta_conditionals], axis=0
        ),
        "sigma_beta": first.sigma_beta if fit.method == "map" else None,
        "tau2_hat": tau2_hat,
        "response": {"center": fit.response.center, "scale": fit.response.scale},
        "train": TRAIN_FILE,
        "particles": PARTICLES_FILE,
        "config": cfg.to_mapping(),
    }
    return write_json(out / FIT_FILE, payload)


def load_fit(path: Path) -> FitResult:
    """Rebuild a FitResult from a fit directory or its fit.json."""
    path = Path(path)
    fit_file = path / FIT_FILE if path.is_dir() else path
    if not fit_file.exists():
        raise InvalidArgumentError(f"Fit artifact not found: {fit_file}")
    with open(fit_file) as f:
        data = json.load(f)
    root = fit_file.parent
    try:
        response = ResponseScale(**data.get("response", {}))
        dataset = response.apply(Dataset.from_csv(root / data["train"]))
        prior = _prior_from_dict(data["prior"])
        basis = build_basis(int(data["d"]), int(data["degree"]), data["active_mask"])
        points = load_matrix_csv(root / data["particles"])
        informative = prior.informative
        if data["method"] == "post":
            ensemble = ParticleEnsemble(particles=points, h=float(data["h"]), step_size=float(data["step_size"]))
            mode = None
        else:
            ensemble = None
            mode = HyperPoint.from_vector(points[0], dataset.d, informative)
    except (KeyError, ValueError) as e:
        raise InvalidArgumentError(f"{fit_file}: malformed fit artifact: {str(e)}") from e
    fit = FitResult(
        prior=prior,
        basis=basis,
        dataset=dataset,
        G=design_matrix(basis, dataset.X),
        mode=mode,
        ensemble=ensemble,
        status=data.get("status", ""),
        aborted=bool(data.get("aborted", False)),
        response=response,
    )
    return attach_conditionals(fit)


def write_interval_report(path: Path, intervals) -> Path:
    return write_rows_csv(
        path,
        (
            {"term": t.label, "estimate": t.estimate, "lower": t.lower, "upper": t.upper, "flagged": int(t.flagged)}
            for t in intervals
        ),
        ["term", "estimate", "lower", "upper", "flagged"],
    )


def write_cv_curve(path: Path, result) -> Path:
    return write_rows_csv(
        path,
        ({"nu": nu, "cv_rmspe": score} for nu, score in zip(result.grid, result.scores)),
        ["nu", "cv_rmspe"],
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _fit(cfg: ExperimentConfig, dataset: Dataset, seed: int, nu: Optional[float] = None,
         basis: Optional[BasisSpec] = None) -> FitResult:
    basis = basis or cfg.basis_for(dataset.d)
    return fit_gp(
        dataset,
        basis,
        cfg.prior_config(dataset.d, nu),
        method=cfg.method,
        N=cfg.N,
        h=cfg.h,
        step_size=cfg.step_size,
        init_box=cfg.init_box_for(dataset.d),
        config=cfg.evi,
        rng=np.random.default_rng(seed),
        standardize=cfg.standardize,
    )


def cmd_fit(cfg: ExperimentConfig) -> FitResult:
    """Fit one model and persist it under cfg.out."""
    start = time.time()
    dataset = training_data(cfg)
    fit = _fit(cfg, dataset, cfg.seed)
    save_fit(fit, cfg.out, cfg)
    if cfg.test_dataset is not None:
        test = Dataset.from_csv(cfg.test_dataset)
        rmspe = standardized_rmspe(predict_aggregate(fit, test.X).mean, test.y)
        write_json(cfg.out / "test_metrics.json", {"n_test": test.n, "rmspe": rmspe})
        logger.info("Held-out standardized RMSPE %.6g on %d points", rmspe, test.n)
    logger.info(
        "Fit (%s, %d points) finished with status %s in %s",
        fit.method, len(fit.points), fit.status, calculate_processing_time(start, time.time()),
    )
    return fit


def cmd_predict(fit_path: Path, query_path: Path, out: Path) -> Path:
    """Write predictions.csv with mean, variance and 95% bounds per query row."""
    fit = load_fit(fit_path)
    query_path = Path(query_path)
    if not query_path.exists():
        raise InvalidArgumentError(f"Query file not found: {query_path}")
    with open(query_path) as f:
        header = f.readline().strip().split(",")
    Xq = load_matrix_csv(query_path)
    if header and header[-1] == "y":
        Xq = Xq[:, :-1]
    d = fit.dataset.d
    if Xq.shape[1] != d:
        raise InvalidArgumentError(f"Query file has {Xq.shape[1]} input columns, fit expects {d}")

    pred = predict_aggregate(fit, Xq)
    out.mkdir(parents=True, exist_ok=True)
    columns = [f"x{j + 1}" for j in range(d)] + ["mean", "variance", "lower95", "upper95"]
    table = np.column_stack([Xq, pred.mean, pred.variance, pred.lower, pred.upper])
    path = save_matrix_csv(out / "predictions.csv", table.reshape(-1, len(columns)), columns)
    logger.info("Wrote %d predictions to %s", Xq.shape[0], path)
    return path


def _replicate(cfg: ExperimentConfig, rep: int) -> Dict[str, Any]:
    seed = cfg.seed + rep
    try:
        train, test = generate_data(cfg, seed)
        fit = _fit(cfg, train, seed)
        pred = predict_aggregate(fit, test.X)
        rmspe = standardized_rmspe(pred.mean, test.y)
        return {"rep": rep, "seed": seed, "rmspe": rmspe, "status": fit.status}
    except EVIGPError as e:
        logger.warning("Replication %d failed: %s", rep, e)
        return {"rep": rep, "seed": seed, "rmspe": float("nan"), "status": f"failed: {e}"}


def cmd_benchmark(cfg: ExperimentConfig) -> Dict[str, Any]:
    """Run cfg.reps replications and write rmspe.csv plus summary.json."""
    if cfg.benchmark is None:
        raise InvalidArgumentError("benchmark needs a benchmark name")
    start = time.time()
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            rows = list(pool.map(lambda r: _replicate(cfg, r), range(cfg.reps)))
    else:
        rows = [_replicate(cfg, r) for r in range(cfg.reps)]

    cfg.out.mkdir(parents=True, exist_ok=True)
    write_rows_csv(cfg.out / "rmspe.csv", rows, ["rep", "seed", "rmspe", "status"])
    summary = summarize([row["rmspe"] for row in rows])
    write_rows_csv(cfg.out / "summary.csv", [summary], list(summary))
    write_json(cfg.out / "summary.json", {"summary": summary, "config": cfg.to_mapping()})
    logger.info(
        "%s: %d replications, %d failed, mean RMSPE %s (%s)",
        cfg.benchmark, cfg.reps, summary["failed"], summary["mean"],
        calculate_processing_time(start, time.time()),
    )
    return summary


def cmd_cv_nu(cfg: ExperimentConfig, dataset: Optional[Dataset] = None,
              basis: Optional[BasisSpec] = None, name: str = "cv_curve.csv"):
    """Write the (nu, mean CV RMSPE) curve and return the CvResult."""
    if not cfg.informative:
        raise InvalidArgumentError("cv-nu needs prior.beta_prior = 'informative'")
    dataset = dataset or training_data(cfg)
    basis = basis or cfg.basis_for(dataset.d)
    result = cv_select_nu(
        dataset,
        basis,
        cfg.prior_config(dataset.d, nu=cfg.nu_grid[0]),
        grid=cfg.nu_grid,
        folds=cfg.folds,
        config=cfg.evi,
        seed=cfg.seed,
        step_size=cfg.step_size,
        h=cfg.h,
        init_box=cfg.init_box_for(dataset.d),
        threads=cfg.threads,
        standardize=cfg.standardize,
    )
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_cv_curve(cfg.out / name, result)
    return result


def cmd_select(cfg: ExperimentConfig) -> Optional[Dict[str, Any]]:
    """
    CV for nu on the full basis, fit, flag terms by credible interval,
    CV again on the reduced basis and refit
    """
    if not cfg.informative:
        raise InvalidArgumentError("select needs prior.beta_prior = 'informative'")
    dataset = training_data(cfg)
    full = cfg.basis_for(dataset.d)
    if full.p == 1:
        logger.info("Mean basis has only the intercept; nothing to select")
        return None

    cv_full = cmd_cv_nu(cfg, dataset, full, "cv_full.csv")
    fit = _fit(cfg, dataset, cfg.seed, nu=cv_full.best_nu, basis=full)
    intervals = beta_intervals(fit, level=cfg.level, rng=np.random.default_rng(cfg.seed))
    write_interval_report(cfg.out / "intervals_full.csv", intervals)
    reduced = select_terms(fit, [t.flagged for t in intervals])
    logger.info("Selected terms: %s", ", ".join(reduced.labels))

    cv_reduced = cmd_cv_nu(cfg, dataset, reduced, "cv_reduced.csv")
    final = _fit(cfg, dataset, cfg.seed, nu=cv_reduced.best_nu, basis=reduced)
    save_fit(final, cfg.out / "final", cfg)

    report = {
        "nu_full": cv_full.best_nu,
        "flagged": [t.label for t in intervals if t.flagged],
        "selected": list(reduced.labels),
        "nu_reduced": cv_reduced.best_nu,
    }
    write_json(cfg.out / "selection.json", report)
    return report


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evigp", description="EVI-GP experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, help="JSON experiment file")
        p.add_argument("--benchmark", choices=sorted(config.BENCHMARK_DEFAULTS))
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path)
        p.add_argument("--threads", type=int)
        p.add_argument("--mode", dest="method", choices=["post", "map"])
        p.add_argument("--degree", type=int, choices=[0, 1, 2])
        p.add_argument("--reps", type=int)
        p.add_argument("--log-level", default=config.DEFAULT_LOG_LEVEL)

    for name in ("fit", "benchmark", "select", "cv-nu"):
        common(sub.add_parser(name))

    predict = sub.add_parser("predict")
    predict.add_argument("--fit", type=Path, required=True, help="Fit directory or fit.json")
    predict.add_argument("--query", type=Path, required=True, help="CSV of unit-cube query inputs")
    predict.add_argument("--out", type=Path)
    predict.add_argument("--log-level", default=config.DEFAULT_LOG_LEVEL)
    return parser


def _write_diagnostics(out: Path, error: NumericalError) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        payload = {"error": str(error), "diagnostics": error.diagnostics}
        if error.last_good is not None:
            payload["last_good"] = np.asarray(error.last_good).tolist()
        write_json(out / "diagnostics.json", payload)
    except OSError as e:
        logger.error("Could not write diagnostics: %s", e)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    out = args.out or config.OUTPUT_DIR
    try:
        if args.command == "predict":
            cmd_predict(args.fit, args.query, out)
            return EXIT_OK

        overrides = {
            "benchmark": args.benchmark,
            "seed": args.seed,
            "out": args.out,
            "threads": args.threads,
            "method": args.method,
            "degree": args.degree,
            "reps": args.reps,
        }
        cfg = load_config(args.config, overrides)
        out = cfg.out
        if args.command == "fit":
            cmd_fit(cfg)
        elif args.command == "benchmark":
            cmd_benchmark(cfg)
        elif args.command == "select":
            cmd_select(cfg)
        elif args.command == "cv-nu":
            result = cmd_cv_nu(cfg)
            write_json(cfg.out / "cv_result.json", {"best_nu": result.best_nu})
            print(result.best_nu)
        return EXIT_OK
    except NumericalError as e:
        logger.error("Numerical failure: %s", e)
        _write_diagnostics(Path(out), e)
        return EXIT_NUMERICAL
    except (EVIGPError, FileNotFoundError) as e:
        logger.error("%s", e)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
