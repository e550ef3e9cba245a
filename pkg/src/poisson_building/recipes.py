"""Result tables behind every CLI subcommand and figure, with optional Monte Carlo twins."""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Callable

import numpy as np

from . import moments
from . import montecarlo as mc
from .config import RunConfig
from .finite import WindowModel, finite_building_laplace, semi_infinite_laplace, window_success
from .grid import ChannelModel, GridParams, avg_density, db_to_linear, sample_realization
from .laplace import laplace_room, laplace_user
from .links import (FreeSpaceParams, LinkQuery, coverage_nearest, coverage_strongest, freespace_coverage,
                    joint_success_d2d, joint_success_same_room, success_d2d)
from .report import MC_COLUMNS, Table, mc_cells

FIGURE_IDS = (3, 4, 7, 8, 9, 10, 11, 13, 15)

# Loss levels (dB) of the figure families; None is K = 0.
FIG7_K_DB = (None, -20.0, -10.0, -5.0, -3.0)
FIG9_K_DB = (-20.0, -10.0, -5.0)
FIG10_K_DB = (-20.0, -10.0)
FIG10_R = (0.1, 1.0)
FIG11_ALPHA = (3.5, 4.0)
FIG11_K_DB = (-10.0, -20.0)
FIG15_K_DB = (None, -20.0, -10.0)
FIG15_REF_K_DB = -5.0


def _k(db: float | None) -> float:
    return 0.0 if db is None else float(db_to_linear(db))


def _cols(base: list[str], with_mc: bool) -> list[str]:
    return base + MC_COLUMNS if with_mc else base


def _seeded(cfg: RunConfig, *ids: int) -> mc.SimConfig:
    """Simulation settings with a seed derived from the run seed and the curve position."""
    sim = cfg.sim()
    seed = int(np.random.SeedSequence([sim.seed, *ids]).generate_state(1)[0])
    return replace(sim, seed=seed)


def _uniform(n: int, r: float, k: float, mu: float = 1.0) -> GridParams:
    return GridParams.uniform(n, r, k, mu)


# --------------------------------------------------------------------------- subcommands


def sample_grid(cfg: RunConfig):
    params = cfg.grid_params()
    window = cfg.doc.get("observation_window") or [[-5.0, 5.0]] * params.n
    if len(window) != params.n:
        from .config import ConfigError

        raise ConfigError(f"observation_window must have {params.n} intervals")
    return sample_realization(params, [tuple(w) for w in window], seed=cfg.sim().seed)


def moments_table(cfg: RunConfig, with_mc: bool = False) -> list[Table]:
    params = cfg.grid_params()
    t = Table("moments", _cols(["quantity", "value"], with_mc), x="quantity", y="value")
    room_samples = _memo(lambda: mc.sim_interference(params, cfg.sim(), perspective="room"))
    user_samples = _memo(lambda: mc.sim_interference(params, cfg.sim(), perspective="user"))
    rows: list[tuple[str, float, Callable]] = [
        ("mean_room", moments.mean_room(params), lambda: room_samples().mean()),
        ("variance_room", moments.variance_room(params), lambda: room_samples().variance()),
        ("mean_user", moments.mean_user(params), lambda: user_samples().mean()),
        ("variance_user", moments.variance_user(params), lambda: user_samples().variance()),
    ]
    if "room" in cfg.doc:
        room = cfg.room(params.n)
        pair = _memo(lambda: mc.sim_pair_interference(params, cfg.sim(), room))
        rows.append(("covariance_room", moments.covariance_room(params, room), lambda: pair().covariance()))
        if moments.variance_room(params) > 0:
            rows.append(("corr_coeff", moments.corr_coeff(params, room), lambda: pair().correlation()))
    for name, value, sim in rows:
        t.add(name, value, *(mc_cells(sim()) if with_mc else []))
    return [t]


def _memo(fn):
    """Evaluate ``fn`` once, on first use."""
    box = []

    def get():
        if not box:
            box.append(fn())
        return box[0]

    return get


def laplace_table(cfg: RunConfig, with_mc: bool = False) -> list[Table]:
    params = cfg.grid_params()
    channel = ChannelModel.parse(cfg.doc["channel"])
    persp = cfg.doc["perspective"]
    fn = laplace_room if persp == "room" else laplace_user
    t = Table("laplace", _cols(["perspective", "channel", "s", "laplace"], with_mc), x="s", y="laplace",
              group=["perspective", "channel"], logx=True)
    samples = _memo(lambda: mc.sim_interference(params, cfg.sim(), channel, persp))
    for s in cfg.doc["s"]:
        value = fn(float(s), params, cfg.series(), channel)
        t.add(persp, channel.value, float(s), value, *(mc_cells(samples().laplace(s)) if with_mc else []))
    return [t]


def success_table(cfg: RunConfig, with_mc: bool = False) -> list[Table]:
    params = cfg.grid_params()
    room = cfg.room(params.n)
    link = cfg.doc["link"]
    t = Table("success", _cols(["room", "theta_db", "success"], with_mc), x="theta_db", y="success",
              group=["room"], ylabel="P[SINR > theta]")
    label = _room_label(room)
    for i, db in enumerate(cfg.thetas_db()):
        q = LinkQuery(float(db_to_linear(db)), link["nu"], link["sigma2"], room)
        value = success_d2d(q, params, cfg.series())
        t.add(label, float(db), value, *(mc_cells(mc.sim_success_d2d(params, _seeded(cfg, 7, i), q))
                                         if with_mc else []))
    return [t]


def _room_label(room) -> str:
    return "(" + " ".join(str(v) for v in room) + ")"


def _joint(theta, theta2, params, room, link, ctrl):
    if all(v == 0 for v in room):
        return joint_success_same_room(theta, theta2, link["nu"], params, link["sigma2"],
                                       link["sigma2_second"], ctrl)
    return joint_success_d2d(theta, theta2, link["nu"], params, room, link["sigma2"], link["sigma2_second"], ctrl)


def joint_success_table(cfg: RunConfig, with_mc: bool = False) -> list[Table]:
    params = cfg.grid_params()
    room = cfg.room(params.n)
    link = cfg.doc["link"]
    t = Table("joint_success", _cols(["room", "theta_db", "theta2_db", "joint_success"], with_mc),
              x="theta_db", y="joint_success", group=["room"])
    for i, db in enumerate(cfg.thetas_db()):
        db2 = float(link.get("theta2_db", db))
        th, th2 = float(db_to_linear(db)), float(db_to_linear(db2))
        value = _joint(th, th2, params, room, link, cfg.series())
        est = None
        if with_mc:
            est = mc.sim_joint_success_d2d(params, _seeded(cfg, 8, i), th, th2, link["nu"], room, link["sigma2"],
                                           link["sigma2_second"])
        t.add(_room_label(room), float(db), db2, value, *(mc_cells(est) if with_mc else []))
    return [t]


def coverage_table(cfg: RunConfig, assoc: str, with_mc: bool = False) -> list[Table]:
    params = cfg.grid_params()
    sigma2 = cfg.doc["link"]["sigma2"]
    dbs = cfg.thetas_db()
    thetas = db_to_linear(dbs)
    fn = coverage_strongest if assoc == "strongest" else coverage_nearest
    t = Table(f"coverage_{assoc}", _cols(["assoc", "theta_db", "coverage", "status"], with_mc), x="theta_db",
              y="coverage", group=["assoc"])
    ests = mc.sim_coverage(params, cfg.sim(), thetas, sigma2, assoc) if with_mc else [None] * len(dbs)
    for db, th, est in zip(dbs, thetas, ests):
        cov = fn(float(th), params, sigma2, cfg.series())
        t.add(assoc, float(db), cov.value, cov.tag, *(mc_cells(est) if with_mc else []))
    return [t]


def finite_table(cfg: RunConfig, with_mc: bool = False) -> list[Table]:
    params = cfg.grid_params()
    ext, oob = cfg.building()
    t = Table("finite_building", _cols(["s", "laplace"], with_mc), x="s", y="laplace", logx=True)
    samples = _memo(lambda: mc.sim_finite_building(params, cfg.sim(), ext, oob))
    for s in cfg.doc["s"]:
        value = finite_building_laplace(float(s), params, ext, oob, cfg.series())
        t.add(float(s), value, *(mc_cells(samples().laplace(s)) if with_mc else []))
    return [t]


def window_table(cfg: RunConfig, with_mc: bool = False) -> list[Table]:
    params = cfg.grid_params()
    room = cfg.room(params.n)
    sigma2 = cfg.doc["link"]["sigma2"]
    model = cfg.window_model()
    t = Table("window_office", _cols(["room", "theta_db", "success"], with_mc), x="theta_db", y="success",
              group=["room"])
    gain = math.prod(k ** abs(v) for k, v in zip(params.k, room))
    samples = _memo(lambda: mc.sim_window(params, cfg.sim(), model))
    for db in cfg.thetas_db():
        th = float(db_to_linear(db))
        value = window_success(th, params, room, sigma2, model, cfg.series())
        est = None
        if with_mc and gain > 0:
            raw = samples().laplace(th / gain)
            f = math.exp(-th * sigma2 / gain)
            est = mc.EstimateReport(raw.point * f, raw.stderr * f, raw.samples)
        t.add(_room_label(room), float(db), value, *(mc_cells(est) if with_mc else []))
    return [t]


def _building_for_density(lam_avg: float, k: float) -> GridParams:
    lam = lam_avg / 12.0
    return GridParams(mu=(1.0,) * 3, lam=(lam,) * 3, k=(k,) * 3)


def compare_freespace(cfg: RunConfig, with_mc: bool = False, alphas=None, k_dbs=None) -> list[Table]:
    """Coverage versus density: 3-D free space against the Poisson building (nearest association)."""
    alpha, densities = cfg.freespace()
    alphas = (alpha,) if alphas is None else alphas
    k_dbs = (cfg.doc["grid"].get("k_db", -10.0),) if k_dbs is None else k_dbs
    dbs = cfg.thetas_db()
    thetas = db_to_linear(dbs)
    free = Table("freespace", _cols(["alpha", "density", "theta_db", "coverage"], with_mc), x="theta_db",
                 y="coverage", group=["alpha", "density"])
    bld = Table("building", _cols(["k_db", "density", "theta_db", "coverage", "status"], with_mc), x="theta_db",
                y="coverage", group=["k_db", "density"])
    for a_i, alpha_ in enumerate(alphas):
        for d_i, lam in enumerate(densities):
            fs = FreeSpaceParams(lam, alpha_)
            for t_i, (db, th) in enumerate(zip(dbs, thetas)):
                est = mc.sim_freespace(fs, _seeded(cfg, 11, a_i, d_i, t_i), float(th)) if with_mc else None
                free.add(float(alpha_), float(lam), float(db), freespace_coverage(float(th), fs),
                         *(mc_cells(est) if with_mc else []))
    for k_i, kdb in enumerate(k_dbs):
        for d_i, lam in enumerate(densities):
            params = _building_for_density(lam, _k(kdb))
            ests = (mc.sim_coverage(params, _seeded(cfg, 12, k_i, d_i), thetas, 0.0, "nearest") if with_mc
                    else [None] * len(dbs))
            for db, th, est in zip(dbs, thetas, ests):
                cov = coverage_nearest(float(th), params, 0.0, cfg.series())
                bld.add(float(kdb), float(avg_density(params)), float(db), cov.value, cov.tag,
                        *(mc_cells(est) if with_mc else []))
    return [free, bld]


# --------------------------------------------------------------------------- figures


def fig3(cfg: RunConfig, with_mc: bool = False) -> list[Table]:
    t = Table("fig3_mean_interference", _cols(["n", "r", "k", "mean"], with_mc), x="k", y="mean",
              group=["n", "r"], xlabel="K", ylabel="mean interference")
    for n in (2, 3):
        for r in (0.05, 0.1, 0.2):
            for i, k in enumerate(np.linspace(0.0, 0.5, 11)):
                params = _uniform(n, r, float(k))
                est = None
                if with_mc:
                    est = mc.sim_interference(params, _seeded(cfg, 3, n, int(r * 100), i)).mean()
                t.add(n, r, float(k), moments.mean_room(params), *(mc_cells(est) if with_mc else []))
    return [t]


def fig4(cfg: RunConfig, with_mc: bool = False) -> list[Table]:
    t = Table("fig4_corr_coeff", _cols(["direction", "k", "delta", "rho"], with_mc), x="delta", y="rho",
              group=["direction", "k"], ylabel="correlation coefficient")
    for direction in ("00d", "ddd"):
        for k in (0.0, 0.01, 0.1, 0.316):
            params = _uniform(3, 0.1, k)
            for delta in range(11):
                room = (0, 0, delta) if direction == "00d" else (delta,) * 3
                est = None
                if with_mc:
                    sims = _seeded(cfg, 4, int(direction == "ddd"), int(k * 1000), delta)
                    est = mc.sim_pair_interference(params, sims, room).correlation()
                t.add(direction, k, delta, moments.corr_coeff(params, room), *(mc_cells(est) if with_mc else []))
    return [t]


def fig7(cfg: RunConfig, with_mc: bool = False) -> list[Table]:
    t = Table("fig7_success", _cols(["k_db", "theta_db", "success"], with_mc), x="theta_db", y="success",
              group=["k_db"], ylabel="in-room success probability")
    for k_i, kdb in enumerate(FIG7_K_DB):
        params = _uniform(3, 0.1, _k(kdb))
        for i, db in enumerate(cfg.thetas_db()):
            q = LinkQuery(float(db_to_linear(db)))
            est = mc.sim_success_d2d(params, _seeded(cfg, 7, k_i, i), q) if with_mc else None
            t.add(_db_label(kdb), float(db), success_d2d(q, params, cfg.series()),
                  *(mc_cells(est) if with_mc else []))
    return [t]


def _db_label(kdb) -> str:
    return "-inf" if kdb is None else repr(float(kdb))


def fig8(cfg: RunConfig, with_mc: bool = False) -> list[Table]:
    t = Table("fig8_joint_success", _cols(["k_db", "theta_db", "joint_success"], with_mc), x="theta_db",
              y="joint_success", group=["k_db"], ylabel="joint in-room success probability")
    for k_i, kdb in enumerate(FIG7_K_DB):
        params = _uniform(3, 0.1, _k(kdb))
        for i, db in enumerate(cfg.thetas_db()):
            th = float(db_to_linear(db))
            est = (mc.sim_joint_success_d2d(params, _seeded(cfg, 8, k_i, i), th, th, 1.0, (0, 0, 0)) if with_mc
                   else None)
            t.add(_db_label(kdb), float(db), joint_success_same_room(th, th, 1.0, params, ctrl=cfg.series()),
                  *(mc_cells(est) if with_mc else []))
    return [t]


def fig9(cfg: RunConfig, with_mc: bool = False) -> list[Table]:
    return [_coverage_family(cfg, "fig9_coverage_strongest", "strongest", [(0.1, kdb) for kdb in FIG9_K_DB],
                             with_mc)]


def fig10(cfg: RunConfig, with_mc: bool = False) -> list[Table]:
    combos = [(r, kdb) for r in FIG10_R for kdb in FIG10_K_DB]
    return [_coverage_family(cfg, "fig10_coverage_nearest", "nearest", combos, with_mc)]


def _coverage_family(cfg, name, assoc, combos, with_mc) -> Table:
    t = Table(name, _cols(["r", "k_db", "theta_db", "coverage", "status"], with_mc), x="theta_db", y="coverage",
              group=["r", "k_db"], ylabel="coverage probability")
    dbs = cfg.thetas_db()
    thetas = db_to_linear(dbs)
    fn = coverage_strongest if assoc == "strongest" else coverage_nearest
    for c_i, (r, kdb) in enumerate(combos):
        params = _uniform(3, r, _k(kdb))
        ests = (mc.sim_coverage(params, _seeded(cfg, 9, c_i), thetas, 0.0, assoc) if with_mc
                else [None] * len(dbs))
        for db, th, est in zip(dbs, thetas, ests):
            cov = fn(float(th), params, 0.0, cfg.series())
            t.add(r, float(kdb), float(db), cov.value, cov.tag, *(mc_cells(est) if with_mc else []))
    return t


def fig11(cfg: RunConfig, with_mc: bool = False) -> list[Table]:
    tables = compare_freespace(cfg, with_mc, alphas=FIG11_ALPHA, k_dbs=FIG11_K_DB)
    tables[0].name = "fig11_freespace"
    tables[1].name = "fig11_building"
    return tables


def fig13(cfg: RunConfig, with_mc: bool = False) -> list[Table]:
    from .finite import BuildingExtents

    t = Table("fig13_semi_infinite", _cols(["k", "s", "laplace"], with_mc), x="s", y="laplace", group=["k"],
              logx=True, ylabel="Laplace transform of the interference")
    s_grid = np.logspace(-2, 2, 17)
    for k_i, k in enumerate((0.1, 0.3)):
        params = GridParams(mu=(1.0,) * 3, lam=(0.1,) * 3, k=(k,) * 3)
        samples = _memo(lambda: mc.sim_finite_building(params, _seeded(cfg, 13, k_i), BuildingExtents.half(3.0)))
        for s in s_grid:
            est = samples().laplace(float(s)) if with_mc else None
            t.add(k, float(s), semi_infinite_laplace(float(s), params, 3.0, cfg.series()),
                  *(mc_cells(est) if with_mc else []))
    return [t]


def fig15(cfg: RunConfig, with_mc: bool = False) -> list[Table]:
    t = Table("fig15_window_office", _cols(["curve", "k_db", "theta_db", "success"], with_mc), x="theta_db",
              y="success", group=["curve", "k_db"], ylabel="in-room success probability")
    w = cfg.doc["window_office"]
    leaky = cfg.window_model()
    sealed = WindowModel.geometric(float(w["l_base"]), 0.0)
    curves = [("leaky", kdb, leaky) for kdb in FIG15_K_DB] + [("no-oob", FIG15_REF_K_DB, sealed)]
    for c_i, (curve, kdb, model) in enumerate(curves):
        k = _k(kdb)
        params = GridParams(mu=(1.0,) * 3, lam=(0.1,) * 3, k=(k, k, 0.0))
        samples = _memo(lambda: mc.sim_window(params, _seeded(cfg, 15, c_i), model))
        for db in cfg.thetas_db():
            th = float(db_to_linear(db))
            est = samples().laplace(th) if with_mc else None
            t.add(curve, _db_label(kdb), float(db), window_success(th, params, (0, 0, 0), 0.0, model, cfg.series()),
                  *(mc_cells(est) if with_mc else []))
    return [t]


FIGURES: dict[int, Callable[[RunConfig, bool], list[Table]]] = {
    3: fig3, 4: fig4, 7: fig7, 8: fig8, 9: fig9, 10: fig10, 11: fig11, 13: fig13, 15: fig15,
}
