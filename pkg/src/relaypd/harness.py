"""Config files, data generation and ingestion, experiment orchestration.

Configs are TOML with a strict schema: unknown sections or keys are
rejected at load time so sweep scripts fail loudly instead of silently
running with a typo'd field. See the README for the full schema.
"""
import csv
import json
import math
import os
from dataclasses import asdict, dataclass, replace

import numpy as np

try:
    import tomllib
except ImportError:  # 3.10
    import tomli as tomllib

from . import engine, metrics, objective, privacy, topology
from .errors import ConfigError, DataError

__all__ = [
    "Seeds",
    "TopologyConfig",
    "RegularizerConfig",
    "ProblemConfig",
    "StepsizeConfig",
    "RunSection",
    "PrivacyConfig",
    "RunConfig",
    "ResultBundle",
    "load_config",
    "gen_synthetic",
    "load_csv_dataset",
    "run_experiment",
    "run_sweep",
    "emit_results",
    "load_results",
]


@dataclass(frozen=True)
class Seeds:
    relay: int = 0
    noise: int = 0
    data: int = 0


@dataclass(frozen=True)
class TopologyConfig:
    kind: str = "complete"
    n: int = None
    p: float = None
    file: str = None


@dataclass(frozen=True)
class RegularizerConfig:
    kind: str = "none"
    nu: float = 0.0
    nu1: float = 0.0
    nu2: float = 0.0
    weight: float = None


@dataclass(frozen=True)
class ProblemConfig:
    source: str = "synthetic"
    q: int = None
    m: int = None
    noise: float = 0.0
    sparsity: float = 0.25
    path: str = None
    loss: str = "least-squares"
    regularizer: RegularizerConfig = RegularizerConfig()


@dataclass(frozen=True)
class StepsizeConfig:
    mode: str = "fraction"
    fraction: float = 0.9
    alphas: tuple = None


@dataclass(frozen=True)
class RunSection:
    iterations: int = 0
    start_agent: int = 1
    output: str = None
    tail_fraction: float = 0.5
    backend: str = None


@dataclass(frozen=True)
class PrivacyConfig:
    enabled: bool = False
    delta: float = None
    attenuation: float = None
    sigma1_sq: float = None
    target_epsilon: float = None


@dataclass(frozen=True)
class RunConfig:
    topology: TopologyConfig = TopologyConfig()
    problem: ProblemConfig = ProblemConfig()
    stepsizes: StepsizeConfig = StepsizeConfig()
    run: RunSection = RunSection()
    privacy: PrivacyConfig = PrivacyConfig()
    seeds: Seeds = Seeds()


@dataclass
class ResultBundle:
    """Config echo, run summary, and the per-iteration records."""

    config: dict
    summary: dict
    records: list


# -- config loading ----------------------------------------------------


def _reject_unknown(section, raw, allowed):
    for key in raw:
        if key not in allowed:
            raise ConfigError("%s: unknown key %r" % (section, key))


def _as_int(raw, section, key, default=None, minimum=None):
    if key not in raw:
        return default
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError("%s.%s: expected an integer" % (section, key))
    if minimum is not None and v < minimum:
        raise ConfigError("%s.%s: must be >= %d" % (section, key, minimum))
    return v


def _as_float(raw, section, key, default=None):
    if key not in raw:
        return default
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError("%s.%s: expected a number" % (section, key))
    return float(v)


def _as_str(raw, section, key, default=None, choices=None):
    if key not in raw:
        return default
    v = raw[key]
    if not isinstance(v, str):
        raise ConfigError("%s.%s: expected a string" % (section, key))
    if choices is not None and v not in choices:
        raise ConfigError(
            "%s.%s: must be one of %s" % (section, key, ", ".join(choices))
        )
    return v


def _load_topology(raw):
    _reject_unknown("topology", raw, ("kind", "n", "p", "file"))
    file = _as_str(raw, "topology", "file")
    if file is not None:
        if "kind" in raw or "n" in raw or "p" in raw:
            raise ConfigError(
                "topology.file: exclusive with kind/n/p (the file fixes the graph)"
            )
        return TopologyConfig(kind=None, file=file)
    kind = _as_str(
        raw, "topology", "kind", default="complete",
        choices=("complete", "ring", "path", "erdos-renyi"),
    )
    n = _as_int(raw, "topology", "n", minimum=1)
    if n is None:
        raise ConfigError("topology.n: required unless a graph file is given")
    p = _as_float(raw, "topology", "p")
    if kind == "erdos-renyi":
        if p is None or not (0.0 < p <= 1.0):
            raise ConfigError("topology.p: erdos-renyi needs p in (0, 1]")
    elif p is not None:
        raise ConfigError("topology.p: only valid for kind 'erdos-renyi'")
    return TopologyConfig(kind=kind, n=n, p=p)


def _load_regularizer(raw):
    _reject_unknown(
        "problem.regularizer", raw, ("kind", "nu", "nu1", "nu2", "weight")
    )
    kind = _as_str(
        raw, "problem.regularizer", "kind", default="none",
        choices=("none", "l1", "elastic-net", "linf", "fused-lasso"),
    )
    nu = _as_float(raw, "problem.regularizer", "nu", default=0.0)
    nu1 = _as_float(raw, "problem.regularizer", "nu1", default=0.0)
    nu2 = _as_float(raw, "problem.regularizer", "nu2", default=0.0)
    weight = _as_float(raw, "problem.regularizer", "weight")
    if min(nu, nu1, nu2) < 0.0:
        raise ConfigError("problem.regularizer: weights must be nonnegative")
    if weight is not None and weight <= 0.0:
        raise ConfigError("problem.regularizer.weight: must be positive")
    return RegularizerConfig(kind=kind, nu=nu, nu1=nu1, nu2=nu2, weight=weight)


def _load_problem(raw):
    allowed = ("source", "q", "m", "noise", "sparsity", "path", "loss", "regularizer")
    _reject_unknown("problem", raw, allowed)
    source = _as_str(
        raw, "problem", "source", default="synthetic",
        choices=("synthetic", "dataset"),
    )
    loss = _as_str(
        raw, "problem", "loss", default="least-squares",
        choices=("least-squares", "logistic"),
    )
    reg_raw = raw.get("regularizer", {})
    if not isinstance(reg_raw, dict):
        raise ConfigError("problem.regularizer: expected a table")
    reg = _load_regularizer(reg_raw)
    if source == "synthetic":
        if "path" in raw:
            raise ConfigError("problem.path: only valid for source 'dataset'")
        if loss != "least-squares":
            raise ConfigError(
                "problem.loss: synthetic generation supports least-squares only; "
                "use gen-data to write a logistic CSV"
            )
        q = _as_int(raw, "problem", "q", minimum=1)
        m = _as_int(raw, "problem", "m", minimum=1)
        if q is None or m is None:
            raise ConfigError("problem.q and problem.m: required for synthetic source")
        noise = _as_float(raw, "problem", "noise", default=0.0)
        if noise < 0.0:
            raise ConfigError("problem.noise: must be nonnegative")
        sparsity = _as_float(raw, "problem", "sparsity", default=0.25)
        if not (0.0 < sparsity <= 1.0):
            raise ConfigError("problem.sparsity: must lie in (0, 1]")
        return ProblemConfig(
            source=source, q=q, m=m, noise=noise, sparsity=sparsity,
            loss=loss, regularizer=reg,
        )
    for key in ("q", "m", "noise", "sparsity"):
        if key in raw:
            raise ConfigError("problem.%s: only valid for source 'synthetic'" % key)
    path = _as_str(raw, "problem", "path")
    if path is None:
        raise ConfigError("problem.path: required for source 'dataset'")
    return ProblemConfig(source=source, path=path, loss=loss, regularizer=reg)


def _load_stepsizes(raw):
    _reject_unknown("stepsizes", raw, ("mode", "fraction", "alphas"))
    mode = _as_str(
        raw, "stepsizes", "mode", default="fraction", choices=("fraction", "explicit")
    )
    if mode == "fraction":
        if "alphas" in raw:
            raise ConfigError("stepsizes.alphas: only valid for mode 'explicit'")
        fraction = _as_float(raw, "stepsizes", "fraction", default=0.9)
        if not (0.0 < fraction < 1.0):
            raise ConfigError("stepsizes.fraction: must lie in (0, 1)")
        return StepsizeConfig(mode=mode, fraction=fraction)
    if "fraction" in raw:
        raise ConfigError("stepsizes.fraction: only valid for mode 'fraction'")
    alphas = raw.get("alphas")
    if not isinstance(alphas, list) or not alphas:
        raise ConfigError("stepsizes.alphas: expected a nonempty list of numbers")
    vals = []
    for i, a in enumerate(alphas):
        if isinstance(a, bool) or not isinstance(a, (int, float)) or a <= 0.0:
            raise ConfigError("stepsizes.alphas[%d]: must be a positive number" % i)
        vals.append(float(a))
    return StepsizeConfig(mode=mode, fraction=None, alphas=tuple(vals))


def _load_run(raw):
    allowed = ("iterations", "start_agent", "output", "tail_fraction", "backend")
    _reject_unknown("run", raw, allowed)
    if "iterations" not in raw:
        raise ConfigError("run.iterations: required")
    iterations = _as_int(raw, "run", "iterations", minimum=0)
    start = _as_int(raw, "run", "start_agent", default=1, minimum=1)
    output = _as_str(raw, "run", "output")
    tail = _as_float(raw, "run", "tail_fraction", default=0.5)
    if not (0.0 < tail <= 1.0):
        raise ConfigError("run.tail_fraction: must lie in (0, 1]")
    backend = _as_str(raw, "run", "backend", choices=("numpy", "cext"))
    return RunSection(
        iterations=iterations, start_agent=start, output=output,
        tail_fraction=tail, backend=backend,
    )


def _load_privacy(raw):
    allowed = ("enabled", "delta", "attenuation", "sigma1_sq", "target_epsilon")
    _reject_unknown("privacy", raw, allowed)
    enabled = raw.get("enabled", False)
    if not isinstance(enabled, bool):
        raise ConfigError("privacy.enabled: expected a boolean")
    if not enabled:
        extra = [k for k in raw if k != "enabled"]
        if extra:
            raise ConfigError(
                "privacy.%s: remove or set privacy.enabled = true" % extra[0]
            )
        return PrivacyConfig()
    delta = _as_float(raw, "privacy", "delta")
    if delta is None or not (0.0 < delta < 1.0):
        raise ConfigError("privacy.delta: required, in (0, 1)")
    attenuation = _as_float(raw, "privacy", "attenuation")
    if attenuation is None or attenuation <= 1.0:
        raise ConfigError("privacy.attenuation: required, must exceed 1")
    sigma1_sq = _as_float(raw, "privacy", "sigma1_sq")
    target = _as_float(raw, "privacy", "target_epsilon")
    if sigma1_sq is not None and target is not None:
        raise ConfigError(
            "privacy.sigma1_sq and privacy.target_epsilon are mutually exclusive"
        )
    if sigma1_sq is None and target is None:
        raise ConfigError("privacy: set one of sigma1_sq or target_epsilon")
    if sigma1_sq is not None and sigma1_sq <= 0.0:
        raise ConfigError("privacy.sigma1_sq: must be positive")
    if target is not None and target <= 0.0:
        raise ConfigError("privacy.target_epsilon: must be positive")
    return PrivacyConfig(
        enabled=True, delta=delta, attenuation=attenuation,
        sigma1_sq=sigma1_sq, target_epsilon=target,
    )


def _load_seeds(raw):
    _reject_unknown("seeds", raw, ("relay", "noise", "data"))
    return Seeds(
        relay=_as_int(raw, "seeds", "relay", default=0, minimum=0),
        noise=_as_int(raw, "seeds", "noise", default=0, minimum=0),
        data=_as_int(raw, "seeds", "data", default=0, minimum=0),
    )


def load_config(path):
    """Parse and validate one TOML config; defaults are filled here."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("parse error in %s: %s" % (path, exc))
    known = ("topology", "problem", "stepsizes", "run", "privacy", "seeds")
    for key in raw:
        if key not in known:
            raise ConfigError("unknown section %r" % key)
    for key in known:
        if key in raw and not isinstance(raw[key], dict):
            raise ConfigError("%s: expected a table" % key)
    for key in ("topology", "problem", "run"):
        if key not in raw:
            raise ConfigError("%s: section required" % key)
    return RunConfig(
        topology=_load_topology(raw["topology"]),
        problem=_load_problem(raw["problem"]),
        stepsizes=_load_stepsizes(raw.get("stepsizes", {})),
        run=_load_run(raw["run"]),
        privacy=_load_privacy(raw.get("privacy", {})),
        seeds=_load_seeds(raw.get("seeds", {})),
    )


# -- data --------------------------------------------------------------


def gen_synthetic(n, q, m, noise_level, sparsity, seed, regularizer=None, weight=None):
    """Random least-squares instance with a planted sparse target.

    Design entries are standard Gaussian; targets are B x + noise with
    i.i.d. Gaussian noise at the given level. The planted x has
    ceil(sparsity * q) nonzero standard-Gaussian coordinates. The draw
    order is fixed (support, values, then per-agent design and noise) so
    instances with the same seed but different noise levels share their
    designs. Returns (instance, planted x).
    """
    if n < 1 or q < 1 or m < 1:
        raise DataError("dimensions must be positive")
    if not (0.0 < sparsity <= 1.0):
        raise DataError("sparsity must lie in (0, 1]")
    if noise_level < 0.0:
        raise DataError("noise level must be nonnegative")
    rng = np.random.default_rng(seed)
    nnz = int(math.ceil(sparsity * q))
    support = rng.choice(q, size=nnz, replace=False)
    x_nat = np.zeros(q)
    x_nat[support] = rng.standard_normal(nnz)
    losses = []
    for _ in range(n):
        B = rng.standard_normal((m, q))
        b = B @ x_nat + noise_level * rng.standard_normal(m)
        losses.append(objective.least_squares_loss(B, b))
    return (
        objective.problem_instance(losses, regularizer=regularizer, reg_weight=weight),
        x_nat,
    )


def _shard_sizes(rows, n):
    base, rem = divmod(rows, n)
    return [base + 1 if i < rem else base for i in range(n)]


def load_csv_dataset(path, n, loss_kind, regularizer=None, weight=None):
    """Read a CSV (last column = label) into n contiguous shards.

    Features are min-max normalized to [0, 1] per column; a constant
    column maps to all zeros. Logistic labels may arrive as {+1, -1}
    (mapped to {1, 0}) or already as {0, 1}.
    """
    rows = []
    try:
        with open(path, newline="") as fh:
            for lineno, cells in enumerate(csv.reader(fh), start=1):
                if not cells:
                    continue
                try:
                    rows.append([float(c) for c in cells])
                except ValueError:
                    raise DataError(
                        "%s line %d: non-numeric cell" % (path, lineno)
                    )
                if len(rows[-1]) != len(rows[0]):
                    raise DataError(
                        "%s line %d: expected %d cells, got %d"
                        % (path, lineno, len(rows[0]), len(rows[-1]))
                    )
    except OSError as exc:
        raise DataError("cannot read dataset %s: %s" % (path, exc))
    if len(rows) < n:
        raise DataError(
            "%s: %d rows cannot be split over %d agents" % (path, len(rows), n)
        )
    if len(rows[0]) < 2:
        raise DataError("%s: need at least one feature column plus the label" % path)
    data = np.array(rows)
    X, labels = data[:, :-1], data[:, -1]
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    X = np.where(span > 0.0, (X - lo) / np.where(span > 0.0, span, 1.0), 0.0)
    if loss_kind == "logistic":
        vals = set(np.unique(labels).tolist())
        if vals <= {-1.0, 1.0}:
            labels = (labels + 1.0) / 2.0
        elif not vals <= {0.0, 1.0}:
            raise DataError(
                "%s: logistic labels must be in {+1,-1} or {0,1}" % path
            )
    losses = []
    offset = 0
    for size in _shard_sizes(len(rows), n):
        Bs, bs = X[offset : offset + size], labels[offset : offset + size]
        offset += size
        if loss_kind == "logistic":
            losses.append(objective.logistic_loss(Bs, bs))
        else:
            losses.append(objective.least_squares_loss(Bs, bs))
    return objective.problem_instance(
        losses, regularizer=regularizer, reg_weight=weight
    )


# -- orchestration -----------------------------------------------------


def _materialize(cfg):
    """Config -> (graph, instance, stepsizes). Deterministic in seeds.data."""
    ss_topo, ss_inst = np.random.SeedSequence(cfg.seeds.data).spawn(2)
    t = cfg.topology
    if t.file is not None:
        graph = topology.read_graph_file(t.file)
    else:
        graph = topology.generate_topology(
            t.kind, t.n, p=t.p, rng=np.random.default_rng(ss_topo)
        )
    pc = cfg.problem
    rc = pc.regularizer
    reg = objective.Regularizer(kind=rc.kind, nu=rc.nu, nu1=rc.nu1, nu2=rc.nu2)
    if pc.source == "synthetic":
        p, _ = gen_synthetic(
            graph.n, pc.q, pc.m, pc.noise, pc.sparsity, ss_inst,
            regularizer=reg, weight=rc.weight,
        )
    else:
        p = load_csv_dataset(
            pc.path, graph.n, pc.loss, regularizer=reg, weight=rc.weight
        )
    sc = cfg.stepsizes
    if sc.mode == "fraction":
        s = objective.stepsizes_from_fraction(p, sc.fraction)
    else:
        if len(sc.alphas) != p.n:
            raise ConfigError(
                "stepsizes.alphas: %d entries for %d agents"
                % (len(sc.alphas), p.n)
            )
        s = objective.StepsizeSet(
            alphas=np.array(sc.alphas), beta=1.0 / (2.0 * (p.n + 1))
        )
    return graph, p, s


def _planned_xi(graph, K):
    g = topology.activation_probabilities(graph)
    return max(1, int(math.ceil(K * float(np.max(g)))))


def _config_echo(cfg):
    echo = asdict(cfg)
    alphas = echo["stepsizes"]["alphas"]
    if alphas is not None:
        echo["stepsizes"]["alphas"] = list(alphas)
    return echo


def run_experiment(cfg, reference=None):
    """Execute one configured run and return its ResultBundle.

    When privacy is enabled with a target epsilon, sigma_1^2 is
    calibrated against the planned composition length ceil(K * max g);
    the reported realized epsilon always comes from the measured
    activation counts, so it is exact for the run that actually
    happened (and can exceed the target when the busiest agent was
    busier than planned).
    """
    graph, p, s = _materialize(cfg)
    if reference is None:
        reference = metrics.reference_solution(p)
    K = cfg.run.iterations
    pv = cfg.privacy
    schedule = None
    planned_eps = 0.0
    sigma1_sq = None
    if pv.enabled:
        alpha_max = float(np.max(s.alphas))
        L_max = float(np.max(p.lipschitz_constants))
        xi_plan = _planned_xi(graph, K)
        if pv.target_epsilon is not None:
            sigma1_sq = privacy.calibrate_sigma(
                pv.target_epsilon, pv.delta, alpha_max, s.beta, L_max,
                pv.attenuation, xi_plan,
            )
        else:
            sigma1_sq = pv.sigma1_sq
        schedule = privacy.NoiseSchedule(
            sigma1_sq=sigma1_sq, attenuation=pv.attenuation
        )
        planned_eps = privacy.epsilon_for_xi(
            alpha_max, s.beta, L_max, schedule, pv.delta, xi_plan
        )
    traj = engine.run(
        p,
        s,
        graph,
        schedule,
        K,
        seed_relay=cfg.seeds.relay,
        seed_noise=cfg.seeds.noise,
        start=cfg.run.start_agent - 1,
        reference=reference,
        backend=cfg.run.backend,
        delta=pv.delta,
    )
    realized_eps = 0.0
    if pv.enabled:
        ledger = privacy.PrivacyLedger(
            alpha=float(np.max(s.alphas)),
            beta=s.beta,
            lipschitz=float(np.max(p.lipschitz_constants)),
            delta=pv.delta,
            schedule=schedule,
            tau=traj.final_state.tau,
        )
        realized_eps = privacy.total_budget(ledger)[0]
    slope = r2 = None
    errs = [r.rel_err for r in traj.records[1:]]
    try:
        slope, r2 = metrics.fit_linear_rate(errs, cfg.run.tail_fraction)
    except ValueError:
        pass
    summary = {
        "iterations": K,
        "final_rel_err": traj.records[-1].rel_err,
        "final_consensus": traj.records[-1].consensus,
        "final_s_dist": traj.records[-1].s_dist,
        "xi": traj.xi,
        "comm": traj.comm,
        "realized_epsilon": realized_eps,
        "planned_epsilon": planned_eps,
        "sigma1_sq": sigma1_sq,
        "backend": traj.backend,
        "rate_slope": slope,
        "rate_r2": r2,
    }
    return ResultBundle(
        config=_config_echo(cfg), summary=summary, records=traj.records
    )


def run_sweep(cfg, epsilons, n_seeds):
    """Paired budget sweep: one noiseless run plus one run per epsilon.

    Trial t uses seeds (relay=t, noise=t+10000, data=t+20000), so every
    budget within a trial shares the instance, the reference solution
    and the relay path, and differs only in the injected noise. Returns
    rows ordered by (epsilon, seed) with the noiseless runs first, plus
    per-budget medians of the final relative error.
    """
    if not epsilons:
        raise ConfigError("sweep needs at least one epsilon")
    eps_list = sorted(float(e) for e in epsilons)
    if any(e <= 0.0 for e in eps_list):
        raise ConfigError("sweep epsilons must be positive")
    if n_seeds < 1:
        raise ConfigError("sweep needs at least one seed")
    pv = cfg.privacy
    if pv.delta is None or pv.attenuation is None:
        raise ConfigError(
            "sweep requires privacy.delta and privacy.attenuation "
            "(set privacy.enabled = true)"
        )
    finals = {None: []}
    for e in eps_list:
        finals[e] = []
    rows = []
    for t in range(n_seeds):
        trial = replace(
            cfg, seeds=Seeds(relay=t, noise=t + 10000, data=t + 20000)
        )
        graph, p, s = _materialize(trial)
        reference = metrics.reference_solution(p)
        base = replace(
            trial, privacy=PrivacyConfig()
        )
        bundle = run_experiment(base, reference=reference)
        finals[None].append(bundle.summary["final_rel_err"])
        rows.append(
            {
                "epsilon": None,
                "seed": t,
                "final_rel_err": bundle.summary["final_rel_err"],
                "realized_epsilon": 0.0,
                "sigma1_sq": None,
            }
        )
        for e in eps_list:
            noisy = replace(
                trial,
                privacy=PrivacyConfig(
                    enabled=True,
                    delta=pv.delta,
                    attenuation=pv.attenuation,
                    target_epsilon=e,
                ),
            )
            bundle = run_experiment(noisy, reference=reference)
            finals[e].append(bundle.summary["final_rel_err"])
            rows.append(
                {
                    "epsilon": e,
                    "seed": t,
                    "final_rel_err": bundle.summary["final_rel_err"],
                    "realized_epsilon": bundle.summary["realized_epsilon"],
                    "sigma1_sq": bundle.summary["sigma1_sq"],
                }
            )
    rows.sort(key=lambda r: (-1.0 if r["epsilon"] is None else r["epsilon"], r["seed"]))
    medians = [
        {"epsilon": e, "median_final_rel_err": float(np.median(finals[e]))}
        for e in [None] + eps_list
    ]
    return {
        "epsilons": eps_list,
        "n_seeds": n_seeds,
        "rows": rows,
        "medians": medians,
    }


# -- emission ----------------------------------------------------------


def _record_dict(r):
    return {
        "k": r.k,
        "agent": r.agent,
        "rel_err": r.rel_err,
        "s_dist": r.s_dist,
        "consensus": r.consensus,
        "comm": r.comm,
        "xi": r.xi,
        "cum_eps": r.cum_eps,
    }


def emit_results(bundle, base):
    """Write {base}.json (config + summary) and {base}.jsonl (records).

    Output is deterministic: sorted keys, no timestamps, records in
    iteration order. Identical bundles produce identical bytes.
    """
    parent = os.path.dirname(os.path.abspath(base))
    os.makedirs(parent, exist_ok=True)
    doc = {"config": bundle.config, "summary": bundle.summary}
    with open(base + ".json", "w") as fh:
        fh.write(json.dumps(doc, sort_keys=True, indent=2))
        fh.write("\n")
    with open(base + ".jsonl", "w") as fh:
        for r in bundle.records:
            fh.write(json.dumps(_record_dict(r), sort_keys=True))
            fh.write("\n")
    return base + ".json", base + ".jsonl"


def load_results(base):
    """Inverse of emit_results; round-trips to an equal bundle."""
    with open(base + ".json") as fh:
        doc = json.load(fh)
    records = []
    with open(base + ".jsonl") as fh:
        for line in fh:
            if line.strip():
                records.append(metrics.IterationRecord(**json.loads(line)))
    return ResultBundle(
        config=doc["config"], summary=doc["summary"], records=records
    )
