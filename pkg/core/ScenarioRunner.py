from typing import Optional

import numpy as np

from core.OutputWriter import OutputWriter
from services.bounds.certificate import ConvergenceBound, convergence_certificate
from services.bounds.envelope import analysis_grid
from services.bounds.sweep import sweep_delta
from services.chain.chain_model import ChainClass
from services.config.context import RunContext
from services.config.scenario import ConfigError, Scenario
from services.solver.integrator import default_grid, integrate, point_mass
from services.solver.reports import CSV_COLUMNS, default_pair, pair_report
from services.solver.truncation import truncation_doubling
from services.transform.conjugation import (
    oracle_discrepancy,
    pair_service_rows,
)
from services.transform.evaluator import MatrixEvaluator
from utils.config import (
    EXIT_OK,
    EXIT_UNCERTIFIED,
    EXIT_VIOLATION,
    ORACLE_TOLERANCE,
)
from utils.logging_config import get_component_logger

logger = get_component_logger("cli")


class ScenarioRunner:
    """Runs one CLI command against a loaded scenario and writes its outputs."""

    def __init__(self, scenario: Scenario, command: str, output_dir: Optional[str] = None, dump_matrix: bool = False):
        self.scenario = scenario
        self.model = scenario.model.model
        self.N = scenario.model.N
        self.analysis = scenario.analysis
        self.context = RunContext(scenario, command, output_dir)
        self.writer = OutputWriter(self.context)
        self.dump_matrix = dump_matrix
        self._evaluator: Optional[MatrixEvaluator] = None

    @property
    def evaluator(self) -> MatrixEvaluator:
        if self._evaluator is None:
            self._evaluator = MatrixEvaluator(self.model, self.N)
        return self._evaluator

    def _finish(self, exit_code: int, **extra) -> int:
        if self.dump_matrix:
            self._dump_matrices()
        self.writer.write_meta(exit_code, **extra)
        return exit_code

    def _dump_matrices(self):
        A = self.evaluator.generator(0.0).dense()
        self.writer.write_csv("matrix_A_t0.csv", ("row", "col", "value"), _dense_rows(A))
        Bstar = self.evaluator.bstar_block(self.analysis.S, 0.0).values
        # 1-based coordinates for B*
        self.writer.write_csv("matrix_Bstar_t0.csv", ("row", "col", "value"), _dense_rows(Bstar, base=1))

    def certificate(self) -> ConvergenceBound:
        return convergence_certificate(
            self.model,
            self.scenario.family.family(),
            self.analysis.S,
            self.analysis.horizon,
            self.analysis.grid_points,
            self.analysis.mode,
            MatrixEvaluator(self.model, self.model.R),
        )

    def _write_certificate(self, bound: ConvergenceBound):
        self.writer.write_json("certificate.json", bound.to_json())
        self.writer.write_csv(
            "alpha_star.csv", ("t", "alpha_star"), zip(bound.grid, bound.alpha_star_trace)
        )

    # ------------------------------------------------------------------ #
    # Commands
    # ------------------------------------------------------------------ #
    def bound(self) -> int:
        bound = self.certificate()
        self._write_certificate(bound)
        return self._finish(EXIT_OK if bound.certified else EXIT_UNCERTIFIED)

    def verify(self, strict_truncation: bool = False, override_beta: Optional[float] = None) -> int:
        bound = self.certificate()
        if override_beta is not None:
            bound = bound.with_beta(override_beta)
        self._write_certificate(bound)
        if not bound.certified:
            logger.warning("Verification skipped: the certificate is not certified")
            return self._finish(EXIT_UNCERTIFIED)

        i, j = self.analysis.pair or default_pair(self.N)
        p0a, p0b = point_mass(self.N, i), point_mass(self.N, j)
        grid = default_grid(self.analysis.horizon, self.analysis.grid_points)
        report, _ = pair_report(self.model, self.N, p0a, p0b, grid, bound, self.analysis.tol, pair=(i, j))
        doubling = truncation_doubling(self.model, self.N, p0b, self.analysis.horizon, self.analysis.tol, grid)

        rhs_diff, rhs_u = bound.initial_norms(p0a, p0b)
        summary = {
            **report.summary(),
            "beta": bound.beta,
            "prefactor": bound.prefactor,
            "initial_norm_difference": rhs_diff,
            "initial_norm_u": rhs_u,
            "doubling_gap": doubling.max_gap,
            "doubling_flagged": doubling.flagged,
            "strict_truncation": strict_truncation,
        }
        self.writer.write_csv("pair_report.csv", CSV_COLUMNS, report.rows())
        self.writer.write_json("verify_summary.json", summary)

        violated = not report.holds
        truncation_failed = strict_truncation and doubling.flagged
        if violated:
            logger.error("Convergence bound violated on the report grid")
        if truncation_failed:
            logger.error(f"Truncation N={self.N} failed the doubling check (gap {doubling.max_gap:.3e})")
        if not (violated or truncation_failed):
            logger.info(f"Bound holds at all {grid.size} grid points; fitted rate {report.fitted_rate:.4g}")
        return self._finish(EXIT_VIOLATION if violated or truncation_failed else EXIT_OK)

    def sweep(self) -> int:
        deltas = self.scenario.family.deltas
        if not deltas:
            raise ConfigError("family.deltas", "sweep needs a nonempty delta grid")
        table = sweep_delta(
            self.model,
            self.scenario.family.rule,
            self.analysis.S,
            deltas,
            self.analysis.horizon,
            self.analysis.grid_points,
            self.analysis.mode,
        )
        rows = [
            (r.delta, r.beta, r.M, r.prefactor, r.certified, k == table.best_index)
            for k, r in enumerate(table.rows)
        ]
        self.writer.write_csv("sweep.csv", ("delta", "beta", "M", "prefactor", "certified", "best"), rows)
        best = table.best
        logger.info(f"Best delta {best.delta:g}: beta={best.beta:.6g} ({'certified' if best.certified else 'uncertified'})")
        return self._finish(EXIT_OK)

    def oracle_check(self, inject_bug: bool = False) -> int:
        S = self.analysis.S
        times = analysis_grid(self.model, self.analysis.horizon, self.analysis.grid_points).times
        worst = oracle_discrepancy(self.model, S, times, inject_bug=inject_bug)
        passed = worst.passed(ORACLE_TOLERANCE)
        report = {
            "method": worst.method,
            "max_discrepancy": worst.value,
            "worst_i": worst.i,
            "worst_j": worst.j,
            "worst_t": worst.t,
            "tolerance": ORACLE_TOLERANCE,
            "S": S,
            "times": len(times),
            "passed": passed,
        }
        display = self._display_rows_match(S)
        if display is not None:
            report["display_rows_match"] = display
            passed = passed and display
        self.writer.write_json("oracle_report.json", report)
        if passed:
            logger.info(f"Oracle check passed ({worst.method}): max discrepancy {worst.value:.3e}")
        else:
            logger.error(
                f"Oracle check FAILED ({worst.method}): discrepancy {worst.value:.3e} "
                f"at (i={worst.i}, j={worst.j}, t={worst.t:g})"
            )
        return self._finish(EXIT_OK if passed else EXIT_VIOLATION)

    def _display_rows_match(self, S: int) -> Optional[bool]:
        """Compare with the pair-service display when the model has that shape."""
        model = self.model
        if model.chain_class is not ChainClass.III or model.R != 2 or not model.is_constant:
            return None
        b = model.service_values(0.0)
        if b[0] != 0.0:
            return None
        lam = model.birth_sequence(S + 1, 0.0)
        if not np.all(lam == lam[0]):
            return None
        rows = self.evaluator.bstar_block(S, 0.0).values[:2]
        return bool(np.allclose(rows, pair_service_rows(lam[0], b[1], S), rtol=0.0, atol=ORACLE_TOLERANCE))

    def simulate(self) -> int:
        start = (self.analysis.pair or (0, 0))[0]
        grid = default_grid(self.analysis.horizon, self.analysis.grid_points)
        trajectory = integrate(
            self.model, self.N, point_mass(self.N, start), self.analysis.horizon, self.analysis.tol, grid, self.evaluator
        )
        header = ("t",) + tuple(f"p{k}" for k in range(self.N + 1))
        rows = (np.concatenate([[t], p]).tolist() for t, p in zip(trajectory.times, trajectory.clamped()))
        self.writer.write_csv("trajectory.csv", header, rows)
        logger.info(f"Trajectory from state {start} written ({grid.size} points, drift {trajectory.normalization_drift():.2e})")
        return self._finish(EXIT_OK)


def _dense_rows(matrix: np.ndarray, base: int = 0):
    n, m = matrix.shape
    for i in range(n):
        for j in range(m):
            yield i + base, j + base, float(matrix[i, j])
