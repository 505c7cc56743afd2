"""
Command-line entry point: identity suites, worked-example regression,
recovery round trips and Cauchy simulations, each producing a RunReport
"""
import argparse
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from cauchy_sim import (FreeData, SimConfig, constraint_convergence, evolve, formal_fourth_derivative_check,
                        lattice_fourth_derivative_check, make_initial_data, parse_modes)
from clifford import (IDENTITY, axial_component_formulas, batch_bilinear, charge_conjugate,
                      clifford_identity_failures, gamma)
from config import (DEFAULT_SEED, DEFAULT_TRIALS, DEFAULT_TOL, EXACT_TOL, EXAMPLE_MASSES, EXAMPLE_TOL,
                    OUTPUT_DIR, RECOVERY_JET_ORDER, UNIT_CIRCLE_TOL_ANALYTIC)
from errors import ConfigError, FieldTheoryError, VanishingDeterminantError
from excel_reporter import ReportWorkbook
from phase_recovery import RecoveryPipeline
from spinor_ops import (PhysParams, apply_chiral_rotation, axial_current, chiral_phase_between,
                        decompose_phase, dot, ghost_field, ghost_residual, reconstruct_from_current,
                        vector_current)
from taylor_fields import current_field_of, matter_from_modes, random_matter
from utils import parse_float_list, read_config_file, setup_logging, write_json
from worked_example import ORIGIN, ExampleConfig, evaluate_example

logger = logging.getLogger(__name__)

ROUNDTRIP_TOL = 1e-6
FOURTH_DERIV_LATTICE_TOL = 1e-2
FOURTH_DERIV_FORMAL_TOL = 1e-8
ORDER_WINDOW = 0.3


@dataclass
class RunReport:
    """Per-check outcomes of one command; JSON keys are sorted so equal runs give equal bytes"""

    command: str
    config: dict = field(default_factory=dict)
    seed: int = None
    checks: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def add_check(self, name, passed, measured=None, tolerance=None, detail=None):
        status = 'pass' if passed else 'fail'
        self.checks.append({'name': name, 'status': status, 'measured': measured,
                            'tolerance': tolerance, 'detail': detail})
        marker = '✓' if passed else '❌'
        logger.info(f"{marker} {name}: {status} (measured {measured}, tolerance {tolerance})")
        return passed

    def add_error(self, name, error):
        self.checks.append({'name': name, 'status': 'error', 'measured': None, 'tolerance': None,
                            'detail': f"{type(error).__name__}: {error}"})
        logger.error(f"❌ {name}: {type(error).__name__}: {error}")

    @property
    def passed(self):
        return bool(self.checks) and all(c['status'] == 'pass' for c in self.checks)

    @property
    def exit_code(self):
        return 0 if self.passed else 1

    def to_dict(self, include_timing=True):
        data = {
            'command': self.command,
            'config': self.config,
            'seed': self.seed,
            'checks': self.checks,
            'results': self.results,
            'passed': self.passed,
        }
        if include_timing:
            data['wall_time'] = self.wall_time
        return data

    def to_xlsx(self, path):
        return ReportWorkbook(path).save(self.to_dict())


# ---------------------------------------------------------------------- round-trip config
@dataclass
class RoundtripConfig:
    """Matter and sampling settings for the current -> Majorana round trip"""

    m: float = 1.0
    e: float = 1.0
    modes: tuple = ()
    n_modes: int = 1
    momentum_scale: float = 1.0
    points: int = 20
    radius: float = 0.5
    order: int = RECOVERY_JET_ORDER
    tol: float = UNIT_CIRCLE_TOL_ANALYTIC
    seed: int = DEFAULT_SEED

    _PARSERS = {
        'm': float, 'e': float, 'modes': parse_modes,
        'n_modes': lambda raw: int(float(raw)), 'momentum_scale': float,
        'points': lambda raw: int(float(raw)), 'radius': float,
        'order': lambda raw: int(float(raw)), 'tol': float, 'seed': lambda raw: int(float(raw)),
    }

    @classmethod
    def from_file(cls, path):
        raw, lines = read_config_file(path)
        kwargs = {}
        for key, value in raw.items():
            where = f"{path}:{lines.get(key, 0)}"
            if key not in cls._PARSERS:
                raise ConfigError(f"{where}: unknown key '{key}'")
            try:
                kwargs[key] = cls._PARSERS[key](value)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"{where}: bad value for '{key}': {e}") from e
        return cls(**kwargs)

    def as_dict(self):
        return {key: getattr(self, key) for key in self._PARSERS}


# ---------------------------------------------------------------------- commands
class VerificationSuite:
    """Runs one command and collects its checks into a RunReport"""

    def __init__(self, seed=DEFAULT_SEED):
        self.seed = seed

    def cmd_verify(self, trials=DEFAULT_TRIALS):
        """Representation identities and pointwise spinor invariants over random samples"""
        if trials < 1:
            raise ValueError(f"trials must be >= 1, got {trials}")
        report = RunReport('verify', {'trials': trials}, self.seed)
        rng = np.random.default_rng(self.seed)

        failures = clifford_identity_failures()
        report.add_check('clifford_identities', not failures, len(failures), 0,
                         [name for name, _ in failures] or None)

        phis = rng.normal(size=(trials, 4))
        density = np.sum(phis ** 2, axis=1)
        scalar = np.max(np.abs(batch_bilinear(phis, IDENTITY)) / density)
        pseudo = np.max(np.abs(batch_bilinear(phis, gamma('five'))) / density)
        report.add_check('majorana_scalar_vanishes', scalar <= EXACT_TOL, float(scalar), EXACT_TOL)
        report.add_check('majorana_pseudoscalar_vanishes', pseudo <= EXACT_TOL, float(pseudo), EXACT_TOL)
        axial = np.max(np.abs(axial_current(phis)) / density[:, None])
        report.add_check('majorana_axial_current_vanishes', axial <= EXACT_TOL, float(axial), EXACT_TOL)

        J = vector_current(phis)
        null = np.max(np.abs(dot(J, J)) / density ** 2)
        report.add_check('current_is_null', null <= EXACT_TOL, float(null), EXACT_TOL)
        report.add_check('density_is_norm', bool(np.allclose(J[:, 0], density, rtol=EXACT_TOL)),
                         float(np.max(np.abs(J[:, 0] - density) / density)), EXACT_TOL)

        psis = rng.normal(size=(trials, 4)) + 1j * rng.normal(size=(trials, 4))
        formulas = axial_component_formulas(psis.T).T
        mismatch = np.max(np.abs(formulas - axial_current(psis)) / np.sum(np.abs(psis) ** 2, axis=1)[:, None])
        report.add_check('axial_component_formulas', mismatch <= EXACT_TOL, float(mismatch), EXACT_TOL)
        involution = np.max(np.abs(charge_conjugate(charge_conjugate(psis)) - psis))
        report.add_check('charge_conjugation_involution', involution == 0.0, float(involution), 0.0)

        worst = {'decompose_phase': 0.0, 'reconstruct_from_current': 0.0, 'chiral_phase_between': 0.0,
                 'ghost_field': 0.0, 'ghost_time_component_vanishes': 0.0}
        for phi, theta, B in zip(phis, rng.uniform(0, 2 * math.pi, trials), rng.normal(size=(trials, 4))):
            norm = float(np.linalg.norm(phi))
            s = np.exp(1j * theta) * phi
            try:
                decomposition = decompose_phase(s)
                worst['decompose_phase'] = max(worst['decompose_phase'],
                                               float(np.max(np.abs(decomposition.reconstruct() - s))) / norm)
                Jphi = vector_current(phi)
                psi = reconstruct_from_current(Jphi)
                worst['reconstruct_from_current'] = max(worst['reconstruct_from_current'],
                                                        float(np.max(np.abs(vector_current(psi) - Jphi))) / Jphi[0])
                angle = chiral_phase_between(phi, psi, tol=1e-8)
                rotated = apply_chiral_rotation(psi, angle)
                gap = min(np.max(np.abs(rotated - phi)), np.max(np.abs(rotated + phi))) / norm
                worst['chiral_phase_between'] = max(worst['chiral_phase_between'], float(gap))
                B[0] = np.dot(Jphi[1:], B[1:]) / Jphi[0]
                D = ghost_field(B, phi, PhysParams(1.0, 1.0), tol=1e-8)
                lhs, scale = ghost_residual(B, D, phi, PhysParams(1.0, 1.0))
                worst['ghost_field'] = max(worst['ghost_field'], float(np.max(np.abs(lhs))) / max(scale, 1.0))
                worst['ghost_time_component_vanishes'] = max(worst['ghost_time_component_vanishes'],
                                                             abs(float(D[0])) / max(float(np.linalg.norm(D)), 1.0))
            except FieldTheoryError as e:
                report.add_error('spinor_invariants', e)
                break
        for name, value in worst.items():
            report.add_check(name, value <= DEFAULT_TOL, value, DEFAULT_TOL)
        return report

    def cmd_example(self, masses=EXAMPLE_MASSES, probe=ORIGIN):
        """Worked example at each mass; m = 0 must end in a vanishing determinant"""
        masses = list(masses)
        report = RunReport('example', {'masses': masses, 'probe': list(probe)}, None)
        for m in masses:
            try:
                result = evaluate_example(ExampleConfig(m=m, probe=probe))
            except VanishingDeterminantError as e:
                report.add_check(f'example[m={m}].vanishing_determinant', m == 0, 0.0, None, str(e))
                continue
            except FieldTheoryError as e:
                report.add_error(f'example[m={m}]', e)
                continue
            if m == 0:
                report.add_check(f'example[m={m}].vanishing_determinant', False, result['det'], None,
                                 'determinant did not vanish at m = 0')
                continue
            report.results[f'm={m}'] = {k: v for k, v in result.items() if k != 'comparison'}
            for quantity, check in result.get('comparison', {}).items():
                report.add_check(f'example[m={m}].{quantity}', check['passed'], check['deviation'],
                                 check['tolerance'])
            report.add_check(f'example[m={m}].unit_circle', result['residual_unit'] <= EXAMPLE_TOL,
                             result['residual_unit'], EXAMPLE_TOL)
        return report

    def cmd_roundtrip(self, cfg):
        """Current of analytic matter -> recovered Majorana field, compared up to one global sign"""
        report = RunReport('roundtrip', cfg.as_dict(), cfg.seed)
        rng = np.random.default_rng(cfg.seed)
        params = PhysParams(cfg.m, cfg.e)
        if cfg.modes:
            matter = matter_from_modes(cfg.modes, params)
        else:
            matter = random_matter(rng, params, cfg.n_modes, cfg.momentum_scale)
        points = rng.uniform(-cfg.radius, cfg.radius, size=(cfg.points, 4))
        spinors, recovery = RecoveryPipeline(params, cfg.order, cfg.tol).run(current_field_of(matter), points)

        good = np.flatnonzero(~np.isnan(spinors[:, 0]))
        errors = [p for p in recovery['points'] if p['status'] == 'error']
        report.results['recovery'] = recovery
        report.add_check('roundtrip.points_recovered', len(good) > 0 and not errors, len(good), cfg.points,
                         {'skipped': cfg.points - len(good) - len(errors), 'errors': len(errors)})
        if len(good):
            truth = np.array([matter.values(*points[i]) for i in good])
            sign = 1.0 if float(spinors[good[0]] @ truth[0]) >= 0 else -1.0
            rel = np.linalg.norm(spinors[good] - sign * truth, axis=1) / np.linalg.norm(truth, axis=1)
            report.add_check('roundtrip.max_rel_error', float(rel.max()) <= ROUNDTRIP_TOL, float(rel.max()),
                             ROUNDTRIP_TOL)
        return report

    def cmd_evolve(self, cfg, csv_dir=None):
        """Initial data, RK4 evolution and constraint-drift checks"""
        report = RunReport('evolve', cfg.as_dict(), cfg.seed)
        state = make_initial_data(cfg)
        run = evolve(state, cfg, csv_dir=csv_dir)
        report.results['evolution'] = run.summary()
        report.add_check('evolve.constraint_drift', run.max_drift <= cfg.drift_tol, run.max_drift, cfg.drift_tol)
        jb_tol = EXACT_TOL * max(1.0, max(run.norms))
        report.add_check('evolve.JB_zero', run.jb_max <= jb_tol, run.jb_max, jb_tol)
        report.add_check('evolve.finite', all(math.isfinite(n) for n in run.norms), max(run.norms), None)
        if not run.causally_shielded:
            logger.warning(f"⚠️ Accuracy claims hold only within the causal margin {cfg.causal_margin}")
        if cfg.convergence_levels >= 2:
            study = constraint_convergence(cfg, cfg.convergence_levels)
            report.results['convergence'] = study
            for i, order in enumerate(study['orders']):
                report.add_check(f'evolve.convergence_order[{i}]',
                                 abs(order - study['nominal_order']) <= ORDER_WINDOW, order, ORDER_WINDOW,
                                 {'nominal': study['nominal_order']})
        return report

    def cmd_fourth_deriv(self, cfg, at=None, csv_dir=None):
        """Fourth time derivatives of B: jet-level oracle and lattice end-to-end comparison"""
        report = RunReport('fourth-deriv', dict(cfg.as_dict(), at=at), cfg.seed)
        params = cfg.params
        matter = matter_from_modes(cfg.modes, params)
        free = FreeData.from_config(cfg)
        point = (0.0,) + tuple(cfg.origin[a] + cfg.h * cfg.probe[a] for a in range(3))
        try:
            _, formal = formal_fourth_derivative_check(free, matter, params, point, FOURTH_DERIV_FORMAL_TOL)
            report.results['formal'] = formal.to_dict(orient='records')
            report.add_check('fourth_deriv.formal_jet', bool(formal['passed'].all()),
                             float(formal['rel_error'].max()), FOURTH_DERIV_FORMAL_TOL)
        except FieldTheoryError as e:
            report.add_error('fourth_deriv.formal_jet', e)

        at_step = None if at is None else int(round(at / cfg.dt))
        lattice = lattice_fourth_derivative_check(cfg, at_step, free, FOURTH_DERIV_LATTICE_TOL)
        report.results['lattice'] = lattice
        report.add_check('fourth_deriv.lattice', lattice['passed'], lattice['max_rel_error'],
                         FOURTH_DERIV_LATTICE_TOL)
        if csv_dir:
            os.makedirs(csv_dir, exist_ok=True)
            path = os.path.join(csv_dir, 'fourth_derivative.csv')
            pd.DataFrame(lattice['table']).to_csv(path, index=False, float_format='%.17g')
            logger.info(f"✓ Wrote {path}")
        return report


# ---------------------------------------------------------------------- argument parsing
def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser():
    parser = argparse.ArgumentParser(description="Majorana Dirac-Maxwell verification suite")
    parser.add_argument('--seed', type=int, default=DEFAULT_SEED)
    parser.add_argument('--out', help="write the JSON run report here")
    parser.add_argument('--xlsx', help="also write the report as a workbook")
    parser.add_argument('--timing', action='store_true',
                        help="include the wall time in the JSON report (equal seeds then no longer give equal bytes)")
    parser.add_argument('--csv-dir', help="directory for CSV snapshots and tables")
    sub = parser.add_subparsers(dest='command', required=True)

    verify = sub.add_parser('verify', help="identity and invariant suites")
    verify.add_argument('--trials', type=_positive_int, default=DEFAULT_TRIALS)

    example = sub.add_parser('example', help="worked-example regression")
    example.add_argument('--mass', type=float, action='append', help="repeatable; default 0.5, 1, 2")
    example.add_argument('--probe', default=None, help="spatial point 'x,y,z' on x^0 = 0")

    roundtrip = sub.add_parser('roundtrip', help="current -> Majorana round trip")
    roundtrip.add_argument('--config')
    roundtrip.add_argument('--mass', type=float)

    evolve_cmd = sub.add_parser('evolve', help="lattice Cauchy evolution")
    evolve_cmd.add_argument('--config')

    fourth = sub.add_parser('fourth-deriv', help="fourth time derivative extraction")
    fourth.add_argument('--config')
    fourth.add_argument('--at', type=float, help="probe time (rounded to a step)")
    return parser


def _in_output_dir(path):
    """Bare file names go to OUTPUT_DIR"""
    return path if os.path.dirname(path) else os.path.join(OUTPUT_DIR, path)


def run_command(args):
    """Dispatch a parsed command line to the suite; config problems surface as ConfigError"""
    suite = VerificationSuite(args.seed)
    if args.command == 'verify':
        return suite.cmd_verify(args.trials)
    if args.command == 'example':
        probe = ORIGIN if args.probe is None else tuple(parse_float_list(args.probe))
        return suite.cmd_example(args.mass or EXAMPLE_MASSES, probe)
    if args.command == 'roundtrip':
        cfg = RoundtripConfig.from_file(args.config) if args.config else RoundtripConfig(seed=args.seed)
        if args.mass is not None:
            cfg.m = args.mass
        return suite.cmd_roundtrip(cfg)
    cfg = SimConfig.from_file(args.config) if args.config else SimConfig(seed=args.seed)
    if args.command == 'evolve':
        return suite.cmd_evolve(cfg, args.csv_dir)
    return suite.cmd_fourth_deriv(cfg, args.at, args.csv_dir)


def main(argv=None):
    """Parse arguments, run one command, write reports; returns the exit code"""
    setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.time()
    try:
        report = run_command(args)
    except (ConfigError, ValueError) as e:
        logger.error(f"❌ {e}")
        return 2
    except FieldTheoryError as e:
        report = RunReport(args.command, {}, args.seed)
        report.add_error(args.command, e)
    report.wall_time = time.time() - start

    if args.out:
        write_json(report.to_dict(include_timing=args.timing), _in_output_dir(args.out))
    if args.xlsx:
        report.to_xlsx(_in_output_dir(args.xlsx))
    status = 'PASSED' if report.passed else 'FAILED'
    logger.info(f"{'='*80}")
    logger.info(f"{args.command}: {status} ({len(report.checks)} checks, {report.wall_time:.1f}s)")
    logger.info(f"{'='*80}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
