"""
Orquestração dos três exemplos de referência e das execuções por método.

Cada execução grava CSVs e um manifesto em `output_dir`. O status de saída é 0
só quando todas as fases terminam e toda trajetória emitida é um simplex.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from reliability.services import csv_service, mc_service, pigan_service, pinn_service
from reliability.services.config_service import ConfigError, ExampleConfig, RunConfig, load_example_config
from reliability.services.csv_service import RunManifest
from reliability.services.markov_service import (
    BernoulliBeta,
    MeasurementSet,
    MultiStateModel,
    initial_vector,
    mean_initial_vector,
    sample_initial_vectors,
)
from reliability.services.metrics_service import (
    EnsembleStats,
    ReplicationEnsemble,
    compare_ensembles,
    ensemble_statistics,
    mean_trajectory,
    reliability_statistics,
    replication_run,
    rmse_by_state,
    summarize_over_time,
)
from reliability.services.ode_service import (
    ProbabilityTrajectory,
    solve_forward_kolmogorov,
    solve_from_vector,
)
from reliability.services.pigan_service import PredictionStats, TrainedGan
from reliability.utils import derive_seed, is_simplex, log_duration, make_rng

logger = logging.getLogger(__name__)

# índices de derivação de sementes por fase
SEED_MC, SEED_PINN, SEED_PIGAN, SEED_INITIAL = 1, 2, 3, 4


@dataclass
class RunResult:
    status: int
    output_dir: Path
    manifest: RunManifest
    summary: str = ""


@dataclass
class _Execucao:
    """Estado de uma execução: pasta de saída, manifesto e artefatos inválidos."""
    out: Path
    manifest: RunManifest
    invalidos: list[str] = field(default_factory=list)
    resumo: list[str] = field(default_factory=list)

    def fase(self, nome: str):
        return log_duration(nome, self.manifest.durations)

    def _verificar(self, nome: str, probs):
        if not is_simplex(probs):
            logger.warning("⚠️ %s não passa na checagem de simplex", nome)
            self.invalidos.append(nome)

    def trajetoria(self, nome: str, traj: ProbabilityTrajectory, up_states) -> Path:
        self._verificar(nome, traj.probs)
        caminho = csv_service.write_trajectory(self.out / nome, traj, up_states)
        self.manifest.add(caminho)
        return caminho

    def estatisticas(self, nome: str, stats: PredictionStats) -> Path:
        self._verificar(nome, stats.mean)
        caminho = csv_service.write_stats(self.out / nome, stats)
        self.manifest.add(caminho)
        return caminho

    def ensemble(self, pasta: str, ens: ReplicationEnsemble, up_states):
        caminhos = csv_service.write_ensemble(self.out / pasta, ens, up_states)
        for caminho, traj in zip(caminhos, ens.trajectories):
            self._verificar(str(caminho.relative_to(self.out)), traj.probs)
            self.manifest.add(caminho)

    def gravar(self, writer, nome: str, *args) -> Path:
        caminho = writer(self.out / nome, *args)
        self.manifest.add(caminho)
        return caminho


def _executar(comando: str, snapshot: dict, seed: int, out, corpo) -> RunResult:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    execucao = _Execucao(out, RunManifest(comando, snapshot, seed))
    logger.info("🚀 Iniciando '%s' (semente %d) → %s", comando, seed, out)
    try:
        corpo(execucao)
        if execucao.invalidos:
            execucao.manifest.status = "invalid"
            execucao.manifest.error = f"non-simplex outputs: {execucao.invalidos}"
            status = 1
        else:
            execucao.manifest.status = "ok"
            status = 0
    except Exception as exc:
        logger.exception("❌ Execução '%s' falhou", comando)
        execucao.manifest.status = "failed"
        execucao.manifest.error = f"{type(exc).__name__}: {exc}"
        status = 1
    csv_service.write_manifest(out / "manifest.json", execucao.manifest)
    resumo = "; ".join(execucao.resumo)
    logger.info("🏁 '%s' terminou com status %d %s", comando, status, resumo)
    return RunResult(status, out, execucao.manifest, resumo)


def _reference(model: MultiStateModel, grid, step: float) -> ProbabilityTrajectory:
    """RK4 a partir do vetor inicial (médio, no caso Bernoulli-Beta)."""
    if isinstance(model.initial, BernoulliBeta):
        return solve_from_vector(model, mean_initial_vector(model.initial, model.state_count), grid, step)
    return solve_forward_kolmogorov(model, grid, step)


def _as_prediction_stats(ens: ReplicationEnsemble, up_states) -> PredictionStats:
    stats = ensemble_statistics(ens)
    r_media, r_desvio = reliability_statistics(ens, up_states)
    return PredictionStats(stats.times, stats.mean, stats.std, r_media, r_desvio)


def relative_efficiency(tempos: dict[str, float], rapido: str, lento: str) -> dict:
    """Compara a duração média de `rapido` com uma replicação de `lento`."""
    return {
        "mean_duration_s": {nome: float(duracao) for nome, duracao in tempos.items()},
        f"{rapido}_faster_than_{lento}": bool(tempos[rapido] < tempos[lento]),
    }


def _eficiencia(execucao: _Execucao, tempos: dict[str, float], rapido: str, lento: str):
    execucao.manifest.efficiency = relative_efficiency(tempos, rapido, lento)
    if not execucao.manifest.efficiency[f"{rapido}_faster_than_{lento}"]:
        logger.warning("⚠️ %s levou mais tempo que uma replicação de %s", rapido, lento)


def _initial_samples(model: MultiStateModel, n: int, seed: int) -> MeasurementSet:
    vetores = sample_initial_vectors(model.initial, n, make_rng(seed), model.state_count)
    return MeasurementSet(np.zeros(n), vetores)


def _concat(a: MeasurementSet, b: MeasurementSet) -> MeasurementSet:
    return MeasurementSet(np.concatenate([a.times, b.times]), np.vstack([a.values, b.values]))


# ---------------------- EXEMPLOS ----------------------

def _example1(cfg: ExampleConfig, execucao: _Execucao, grid, reps: int, iterations: int | None):
    model = cfg.build_model()
    seed = execucao.manifest.seed
    up = model.up_states

    with execucao.fase("ode"):
        referencia = solve_forward_kolmogorov(model, grid, cfg.ode.step)
    execucao.trajetoria("trajectory_ode.csv", referencia, up)

    seed_mc = execucao.manifest.seeds["mc"] = derive_seed(seed, SEED_MC)
    with execucao.fase("mc"):
        mc = mc_service.simulate_replications(model, reps, cfg.mc.paths, grid, seed_mc)
    execucao.trajetoria("trajectory_mc.csv", mean_trajectory(mc), up)
    execucao.ensemble("replications/mc", mc, up)
    execucao.gravar(csv_service.write_mc_summary, "mc_summary.csv", mc)
    execucao.manifest.replication_durations["mc"] = [float(d) for d in mc.durations]

    pinn_cfg = cfg.pinn.build(model.state_count, 0, iterations)
    seed_pinn = execucao.manifest.seeds["pinn"] = derive_seed(seed, SEED_PINN)
    with execucao.fase("pinn"):
        pinn = replication_run(pinn_service.replication_task(model, pinn_cfg, grid), reps, seed_pinn)
    execucao.trajetoria("trajectory_pinn.csv", mean_trajectory(pinn), up)
    execucao.ensemble("replications/pinn", pinn, up)
    execucao.manifest.replication_durations["pinn"] = [float(d) for d in pinn.durations]

    rmse = rmse_by_state(pinn, referencia)
    execucao.gravar(csv_service.write_rmse, "rmse.csv", grid, rmse)
    execucao.gravar(csv_service.write_rmse, "rmse_mc.csv", grid, rmse_by_state(mc, referencia))
    delta_p, delta_sigma = compare_ensembles(ensemble_statistics(pinn), ensemble_statistics(mc))
    execucao.gravar(csv_service.write_deltas, "deltas.csv", grid, delta_p, delta_sigma)

    resumo = summarize_over_time(rmse, [f"p{j}" for j in range(model.state_count)])
    logger.info("📊 RMSE da PINN ao longo do tempo:\n%s", resumo.to_string())
    _eficiencia(execucao, {"pinn": float(np.mean(pinn.durations)), "mc": float(np.mean(mc.durations))}, "pinn", "mc")
    execucao.resumo.append(f"RMSE máximo da PINN {rmse.max():.3e}")


def _example2(cfg: ExampleConfig, execucao: _Execucao, grid, reps: int, iterations: int | None,
              mc_paths: int | None):
    model = cfg.build_model()
    seed = execucao.manifest.seed
    up = model.up_states

    with execucao.fase("ode"):
        referencia = _reference(model, grid, cfg.ode.step)
    execucao.trajetoria("trajectory_ode_mean.csv", referencia, up)

    seed_iniciais = execucao.manifest.seeds["initial_samples"] = derive_seed(seed, SEED_INITIAL)
    dados = _initial_samples(model, cfg.pigan.initial_samples, seed_iniciais)
    execucao.gravar(csv_service.write_measurements, "measurements.csv", dados)

    seed_gan = execucao.manifest.seeds["pigan"] = derive_seed(seed, SEED_PIGAN)
    gan_cfg = cfg.pigan.build(model.state_count, seed_gan, iterations)
    with execucao.fase("pigan"):
        treinado = pigan_service.train_pigan(model, dados, gan_cfg)
        gan_stats = pigan_service.predict_statistics(treinado.generator, grid, gan_cfg.sample_count, up,
                                                     pigan_service.evaluation_seed(gan_cfg))
    execucao.estatisticas("stats_pigan.csv", gan_stats)
    execucao.manifest.add(*pigan_service.save_gan(treinado, execucao.out / "pigan"))

    seed_mc = execucao.manifest.seeds["mc"] = derive_seed(seed, SEED_MC)
    with execucao.fase("mc"):
        mc = mc_service.simulate_replications(model, reps, mc_paths or cfg.mc.paths, grid, seed_mc,
                                              epistemic=cfg.mc.epistemic)
    mc_stats = _as_prediction_stats(mc, up)
    execucao.estatisticas("stats_mc.csv", mc_stats)
    execucao.gravar(csv_service.write_mc_summary, "mc_summary.csv", mc)
    execucao.manifest.replication_durations["mc"] = [float(d) for d in mc.durations]

    delta_p, delta_sigma = compare_ensembles(
        EnsembleStats(grid, gan_stats.mean, gan_stats.std),
        EnsembleStats(grid, mc_stats.mean, mc_stats.std),
    )
    execucao.gravar(csv_service.write_deltas, "deltas.csv", grid, delta_p, delta_sigma)

    duracao_gan = execucao.manifest.durations["pigan"]
    _eficiencia(execucao, {"pigan": duracao_gan, "mc": float(np.mean(mc.durations))}, "pigan", "mc")
    execucao.resumo.append(f"perda final do gerador {treinado.generator_history[-1]:.3e}")


def _coverage_rows(cenario: str, etapa: pigan_service.SequentialStage, up_states, width: float = 2.0) -> list[dict]:
    reais = etapa.data.real_entries()
    tempos = etapa.data.times[reais]
    medidas = etapa.data.values[reais][:, sorted(up_states)].sum(axis=1)
    trained: TrainedGan = etapa.trained
    stats = pigan_service.predict_statistics(trained.generator, tempos, trained.config.sample_count, up_states,
                                             pigan_service.evaluation_seed(trained.config))
    inferior, superior = stats.band(width)
    return [
        {
            "scenario": cenario,
            "stage": etapa.inspections,
            "t": float(t),
            "R_measured": float(r),
            "R_lower": float(lo),
            "R_upper": float(hi),
            "inside": bool(lo <= r <= hi),
        }
        for t, r, lo, hi in zip(tempos, medidas, inferior, superior)
    ]


def _example3(cfg: ExampleConfig, execucao: _Execucao, grid, iterations: int | None):
    model = cfg.build_model()
    seed = execucao.manifest.seed
    up = model.up_states
    s0 = initial_vector(model.initial, model.state_count)

    with execucao.fase("ode"):
        referencia = solve_forward_kolmogorov(model, grid, cfg.ode.step)
    execucao.trajetoria("trajectory_ode.csv", referencia, up)

    def oraculo(t: float) -> np.ndarray:
        if t == 0:
            return s0
        return solve_from_vector(model, s0, [0.0, t], min(cfg.ode.step, t)).probs[-1]

    seed_gan = execucao.manifest.seeds["pigan"] = derive_seed(seed, SEED_PIGAN)
    gan_cfg = cfg.pigan.build(model.state_count, seed_gan, iterations)
    cobertura = []
    for cenario, sc in cfg.scenarios.items():
        dados = pigan_service.synthesize_shifted_measurements(oraculo, sc.inspections, sc.shifts, cenario)
        execucao.gravar(csv_service.write_measurements, f"measurements_{cenario}.csv", dados)
        with execucao.fase(f"pigan_{cenario}"):
            etapas = pigan_service.sequential_update(model, dados, s0, grid, gan_cfg)
        for etapa in etapas:
            execucao.estatisticas(f"stats_{cenario}_stage{etapa.inspections}.csv", etapa.stats)
            execucao.gravar(csv_service.write_bands, f"bands_{cenario}_stage{etapa.inspections}.csv",
                            etapa.stats, referencia.reliability(up))
            cobertura.extend(_coverage_rows(cenario, etapa, up))
    execucao.gravar(csv_service.write_summary, "coverage.csv", cobertura)
    fora = [linha for linha in cobertura if not linha["inside"]]
    if fora:
        logger.warning("⚠️ %d medições fora da faixa de dois desvios", len(fora))
    execucao.resumo.append(f"{len(cobertura) - len(fora)}/{len(cobertura)} medições dentro da faixa")


def run_example(n: int, output_dir, seed: int = 0, grid=None, replications: int | None = None,
                full_scale: bool = False, iterations: int | None = None) -> RunResult:
    cfg = load_example_config(n)
    escala = cfg.full_scale if full_scale else None
    reps = replications or (escala.replications if escala and escala.replications else cfg.replications)
    iteracoes = iterations or (escala.iterations if escala else None)
    mc_paths = escala.mc_paths if escala else None
    grade = cfg.grid.times() if grid is None else np.asarray(grid, dtype=np.float64)

    snapshot = cfg.model_dump(mode="json")
    snapshot["resolved"] = {
        "grid": grade.tolist(), "replications": reps, "iterations": iteracoes,
        "mc_paths": mc_paths, "full_scale": full_scale,
    }

    def corpo(execucao: _Execucao):
        if n == 1:
            _example1(cfg, execucao, grade, reps, iteracoes)
        elif n == 2:
            _example2(cfg, execucao, grade, reps, iteracoes, mc_paths)
        else:
            _example3(cfg, execucao, grade, iteracoes)

    return _executar(f"example {n}", snapshot, seed, output_dir, corpo)


# ---------------------- EXECUÇÃO POR MÉTODO ----------------------

def pigan_measurements(config: RunConfig, model: MultiStateModel) -> MeasurementSet:
    """
    Dados de treino da PIGAN. Uma linha em t = 0 no arquivo de medições é
    tratada como a condição inicial; sem ela, s₀ é acrescentado na frente.
    """
    metodo = config.method
    medidas = csv_service.read_measurements(metodo.measurements) if metodo.measurements else None
    if isinstance(model.initial, BernoulliBeta):
        iniciais = _initial_samples(model, metodo.initial_samples, derive_seed(config.seed, SEED_INITIAL))
        return iniciais if medidas is None else _concat(iniciais, medidas)
    if medidas is None:
        raise ConfigError(
            "pigan requires measurement data: set method.measurements or use a distributional initial condition"
        )
    if medidas.times[0] == 0:
        return MeasurementSet(medidas.times, medidas.values, initial_entry=True)
    return pigan_service.with_initial_condition(medidas, initial_vector(model.initial, model.state_count))


def run_method(config: RunConfig, iterations: int | None = None) -> RunResult:
    model = config.model.build()
    grid = config.grid.times()
    metodo = config.method
    up = model.up_states

    def corpo(execucao: _Execucao):
        if metodo.name == "ode":
            with execucao.fase("ode"):
                traj = _reference(model, grid, metodo.step)
            execucao.trajetoria("trajectory_ode.csv", traj, up)
            execucao.resumo.append(f"R({grid[-1]:g}) = {traj.reliability(up)[-1]:.4f}")

        elif metodo.name == "mc":
            seed_mc = execucao.manifest.seeds["mc"] = derive_seed(config.seed, SEED_MC)
            with execucao.fase("mc"):
                ens = mc_service.simulate_replications(model, config.replications, metodo.paths, grid, seed_mc,
                                                       epistemic=metodo.epistemic)
            execucao.trajetoria("trajectory_mc.csv", mean_trajectory(ens), up)
            execucao.gravar(csv_service.write_mc_summary, "mc_summary.csv", ens)
            execucao.manifest.replication_durations["mc"] = [float(d) for d in ens.durations]
            if len(ens) > 1:
                execucao.ensemble("replications", ens, up)
            execucao.resumo.append(f"{len(ens)} × {metodo.paths} trajetórias")

        elif metodo.name == "pinn":
            seed_pinn = execucao.manifest.seeds["pinn"] = derive_seed(config.seed, SEED_PINN)
            pinn_cfg = metodo.build(model.state_count, seed_pinn, iterations)
            if config.replications == 1:
                with execucao.fase("pinn"):
                    treinado = pinn_service.train_pinn(model, pinn_cfg)
                    traj = pinn_service.predict_state_probabilities(treinado, grid)
                execucao.trajetoria("trajectory_pinn.csv", traj, up)
                execucao.manifest.add(pinn_service.save_surrogate(treinado, execucao.out / "pinn.pt"))
                execucao.resumo.append(f"perda final {treinado.final_loss:.3e}")
            else:
                with execucao.fase("pinn"):
                    ens = replication_run(pinn_service.replication_task(model, pinn_cfg, grid),
                                          config.replications, seed_pinn)
                execucao.trajetoria("trajectory_pinn.csv", mean_trajectory(ens), up)
                execucao.ensemble("replications", ens, up)
                execucao.manifest.replication_durations["pinn"] = [float(d) for d in ens.durations]
                execucao.resumo.append(f"{len(ens)} replicações")

        else:
            dados = pigan_measurements(config, model)
            seed_gan = execucao.manifest.seeds["pigan"] = derive_seed(config.seed, SEED_PIGAN)
            gan_cfg = metodo.build(model.state_count, seed_gan, iterations)
            with execucao.fase("pigan"):
                treinado = pigan_service.train_pigan(model, dados, gan_cfg)
                stats = pigan_service.predict_statistics(treinado.generator, grid, gan_cfg.sample_count, up,
                                                         pigan_service.evaluation_seed(gan_cfg))
            execucao.estatisticas("stats_pigan.csv", stats)
            execucao.manifest.add(*pigan_service.save_gan(treinado, execucao.out / "pigan"))
            execucao.resumo.append(f"{gan_cfg.sample_count} amostras por instante")

    return _executar(f"run {metodo.name}", config.snapshot(), config.seed, config.output_dir, corpo)


def run_metrics(ensemble_dir, reference_csv, output_dir) -> RunResult:
    """RMSE por estado de um diretório de trajetórias contra uma referência."""
    snapshot = {"ensemble_dir": str(ensemble_dir), "reference": str(reference_csv)}

    def corpo(execucao: _Execucao):
        ens = csv_service.read_ensemble(ensemble_dir)
        referencia = csv_service.read_trajectory(reference_csv)
        rmse = rmse_by_state(ens, referencia)
        execucao.gravar(csv_service.write_rmse, "rmse.csv", ens.times, rmse)
        stats = ensemble_statistics(ens)
        if not is_simplex(stats.mean):
            execucao.invalidos.append("ensemble mean")
        resumo = summarize_over_time(rmse, [f"p{j}" for j in range(ens.state_count)])
        execucao.gravar(csv_service.write_frame, "rmse_summary.csv", resumo.rename_axis("state").reset_index())
        execucao.resumo.append(f"{len(ens)} replicações, RMSE máximo {rmse.max():.3e}")

    return _executar("metrics", snapshot, 0, output_dir, corpo)
