"""Command-line front end: parameter sweeps and the exact-diagonalization
self-test, writing CSV tables (sweeps) or a JSON report (oracle-check).

Configuration is an INI-style ``key = value`` file with sections [run],
[model], [grid], [numerics] and [classical]; every key can be overridden by
the flag of the same name. Grids are comma-separated numbers or
``logrange:LO:HI:COUNT``.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 oracle-check
failure.
"""
import argparse
import configparser
import csv
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import cft_scaling, chi_models, ed_oracle, lr_engine
from .errors import CritworkError, DomainError, ObservableUnavailable

COMMANDS = ('crossover', 'kz-collapse', 'sudden-map', 'classical', 'oracle-check')
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ORACLE = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


# --- configuration ------------------------------------------------------------------

def _floats(text):
    text = text.strip()
    if text.startswith('logrange:'):
        parts = text.split(':')[1:]
        if len(parts) != 3:
            raise ValueError("expected logrange:LO:HI:COUNT")
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        if not (lo > 0 and hi > 0):
            raise ValueError("logrange bounds must be positive")
        return tuple(float(v) for v in np.geomspace(lo, hi, count))
    if not text:
        return ()
    return tuple(float(v) for v in text.split(','))


def _ints(text):
    return tuple(int(v) for v in text.split(',') if v.strip())


def _opt_float(text):
    return None if text.strip().lower() in ('', 'none') else float(text)


def _opt_int(text):
    return None if text.strip().lower() in ('', 'none') else int(text)


def _fmt_seq(values):
    return ', '.join(repr(v) for v in values)


def _fmt_opt(value):
    return 'none' if value is None else repr(value)


# name -> (section, parser, formatter)
_SCHEMA = {
    'command': ('run', str, str),
    'output': ('run', str, str),
    'seed': ('run', int, repr),
    'model': ('model', str, str),
    'gamma': ('model', float, repr),
    'eps_d': ('model', float, repr),
    'band_cutoff': ('model', _opt_float, _fmt_opt),
    'delta': ('model', _opt_float, _fmt_opt),
    'channels': ('model', _opt_int, _fmt_opt),
    'cutoff': ('model', float, repr),
    'tau0': ('model', _opt_float, _fmt_opt),
    'T': ('grid', _floats, _fmt_seq),
    'tau': ('grid', _floats, _fmt_seq),
    'tauT': ('grid', _floats, _fmt_seq),
    'A': ('grid', _floats, _fmt_seq),
    'n': ('grid', _ints, _fmt_seq),
    'tol': ('numerics', float, repr),
    'n_samples': ('classical', int, repr),
    'eps_d0': ('classical', float, repr),
    'gamma_rate': ('classical', float, repr),
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    output: str = '-'
    seed: int = 0
    model: str = 'mrlm'
    gamma: float = 1.0
    eps_d: float = 0.0
    band_cutoff: float = None
    delta: float = None
    channels: int = None
    cutoff: float = 1.0
    tau0: float = None
    T: tuple = (0.1,)
    tau: tuple = (1.0,)
    tauT: tuple = (1e-3, 1e-2, 1e-1)
    A: tuple = (0.1,)
    n: tuple = (1, 2, 3)
    tol: float = lr_engine.DEFAULT_TOL
    n_samples: int = 100_000
    eps_d0: float = 0.0
    gamma_rate: float = 1.0

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"[run] command: unknown command {self.command!r}")
        kind = self.model.split(':', 1)[0]
        if kind not in ('rlm', 'mrlm', 'cft', 'table'):
            raise ConfigError(f"[model] model: unknown model {self.model!r}")
        if kind == 'table':
            path = self.model.partition(':')[2]
            if not path or not Path(path).is_file():
                raise ConfigError(f"[model] model: table file not found in {self.model!r}")
        if kind == 'cft' and self.delta is None and self.channels is None:
            raise ConfigError("[model] cft needs delta or channels")
        if not self.tol > 0:
            raise ConfigError("[numerics] tol: must be > 0")
        for name in ('T', 'A', 'n'):
            if not getattr(self, name):
                raise ConfigError(f"[grid] {name}: empty grid")
        grid = 'tauT' if self.command == 'kz-collapse' else 'tau'
        if self.command != 'oracle-check' and not getattr(self, grid):
            raise ConfigError(f"[grid] {grid}: empty grid")
        if any(not t > 0 for t in self.T):
            raise ConfigError("[grid] T: temperatures must be positive")
        if any(t < 0 for t in self.tau + self.tauT):
            raise ConfigError("[grid] tau: durations must be >= 0")
        if any(k not in (1, 2, 3) for k in self.n):
            raise ConfigError("[grid] n: cumulant orders must be 1, 2 or 3")
        if self.n_samples < 2:
            raise ConfigError("[classical] n_samples: must be >= 2")
        return self

    def dump(self):
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        for f in fields(self):
            section, _, fmt = _SCHEMA[f.name]
            if not parser.has_section(section):
                parser.add_section(section)
            parser.set(section, f.name, fmt(getattr(self, f.name)))
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()


def _line_of(text, section, key):
    current = None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if s.startswith('[') and s.endswith(']'):
            current = s[1:-1].strip()
        elif current == section and s.split('=', 1)[0].strip() == key:
            return i
    return None


def parse_config(text, source='<config>'):
    """Parse INI text into a dict of typed values, with line diagnostics."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key not in _SCHEMA:
                line = _line_of(text, section, key)
                raise ConfigError(f"{source}:{line}: unknown key {key!r} in [{section}]")
            expected, conv, _ = _SCHEMA[key]
            if expected != section:
                line = _line_of(text, section, key)
                raise ConfigError(f"{source}:{line}: key {key!r} belongs in [{expected}]")
            try:
                values[key] = conv(raw)
            except ValueError as exc:
                line = _line_of(text, section, key)
                raise ConfigError(f"{source}:{line}: [{section}] {key} = {raw!r}: {exc}") from None
    return values


def build_config(command, config_path=None, overrides=None):
    values = {}
    if config_path:
        try:
            text = Path(config_path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        values.update(parse_config(text, str(config_path)))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    values['command'] = command if command else values.get('command')
    if values['command'] is None:
        raise ConfigError("no command given")
    return RunConfig(**values).validate()


# --- models ----------------------------------------------------------------------------

def make_model(cfg, T=None):
    T = cfg.T[0] if T is None else T
    kind = cfg.model.split(':', 1)[0]
    if kind == 'mrlm':
        return chi_models.MajoranaRLM(cfg.gamma, T)
    if kind == 'rlm':
        return chi_models.RLM(cfg.gamma, T, cfg.eps_d, cfg.band_cutoff)
    if kind == 'cft':
        delta = cfg.delta if cfg.delta is not None else cft_scaling.scaling_dimension(cfg.channels)
        return cft_scaling.CftChi(delta, cfg.cutoff, T, cfg.tau0)
    return chi_models.TabulatedChi.from_file(cfg.model.split(':', 1)[1], T)


def _model_scale(cfg, model):
    """(Delta, Lambda) used for the Kibble-Zurek rescaling."""
    if model.kind == 'cft':
        return model.delta, model.cutoff
    if model.kind == 'mrlm':
        return 0.5, 2 * math.pi * model.gamma
    raise ConfigError(f"[model] model: kz-collapse needs a critical model, not {cfg.model!r}")


# --- output ------------------------------------------------------------------------------

def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    return str(v)


def write_csv(header, rows, dest):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    text = buf.getvalue()
    if dest in (None, '-'):
        sys.stdout.write(text)
    else:
        Path(dest).write_text(text)
    return text


# --- commands ------------------------------------------------------------------------------

CROSSOVER_HEADER = ('model', 'delta', 'T', 'tau', 'A', 'n', 'kappa', 'kappa_err', 'route', 'status')


def cmd_crossover(cfg, threads=None):
    model = make_model(cfg)
    rows = lr_engine.crossover_sweep(model, cfg.T, cfg.tau, cfg.A, cfg.n, cfg.tol, threads)
    return CROSSOVER_HEADER, [tuple(r) for r in rows]


KZ_HEADER = ('model', 'delta', 'T', 'tauT', 'tau', 'A', 'kappa1', 'scaled', 'spread', 'status')


def cmd_kz_collapse(cfg, threads=None):
    """Rescaled <W_diss>: (Lambda/T)^(2 Delta - 1) kappa^1 Lambda / A^2 against tau T.
    ``spread`` is (max - min)/mean of the rescaled value over T at fixed tau T."""
    model = make_model(cfg)
    delta, lam = _model_scale(cfg, model)
    rows = []
    for T in cfg.T:
        taus = [x / T for x in cfg.tauT]
        for r in lr_engine.crossover_sweep(model, [T], taus, cfg.A, (1,), cfg.tol, threads):
            scaled = (lam / T)**(2 * delta - 1) * r.value * lam / r.A**2
            rows.append([r.model, delta, T, r.tau * T, r.tau, r.A, r.value, scaled, r.status])
    by_x = {}
    for row in rows:
        by_x.setdefault((round(row[3], 12), row[5]), []).append(row[7])
    out = []
    for row in rows:
        vals = np.asarray(by_x[(round(row[3], 12), row[5])])
        spread = float((vals.max() - vals.min()) / abs(vals.mean())) if np.all(np.isfinite(vals)) else float('nan')
        out.append(tuple(row[:8]) + (spread, row[8]))
    out.sort(key=lambda r: (r[0], r[2], r[4], r[5]))
    return KZ_HEADER, out


SUDDEN_HEADER = ('model', 'T', 'A', 'kappa1', 'kappa3', 'dkappa3_dT', 'status')


def cmd_sudden_map(cfg, threads=None):
    """kappa^1 = (A^2/2) chi_static and kappa^3 = -(A^2/2) <H_SE> over T, with
    d kappa^3/dT by Richardson-extrapolated central differences."""
    rows = []
    for T in cfg.T:
        model = make_model(cfg, T)
        for A in cfg.A:
            k1 = lr_engine.sudden_kappa1(model, A)
            try:
                k3 = lr_engine.sudden_kappa3(model, A)
                h = 1e-3 * T
                f = {s: lr_engine.sudden_kappa3(model.with_temperature(T + s * h), A)
                     for s in (-1, -0.5, 0.5, 1)}
                d1 = (f[1] - f[-1]) / (2 * h)
                d2 = (f[0.5] - f[-0.5]) / h
                rows.append((model.kind, T, A, k1, k3, (4 * d2 - d1) / 3, 'ok'))
            except ObservableUnavailable:
                rows.append((model.kind, T, A, k1, float('nan'), float('nan'),
                             'observable-unavailable'))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return SUDDEN_HEADER, rows


CLASSICAL_HEADER = ('T', 'tau', 'A', 'eps_d0', 'gamma_rate', 'n_samples', 'seed',
                    'm1', 'm2', 'm3', 'se1', 'se2', 'se3', 'delta_f', 'jarzynski',
                    'jarzynski_se', 'sudden_m1', 'sudden_m2', 'sudden_m3')


def cmd_classical(cfg, threads=None):
    rows = []
    sc = chi_models.ClassicalTrajectoryConfig(cfg.n_samples, cfg.seed)
    for T in cfg.T:
        for tau in cfg.tau:
            for A in cfg.A:
                d = chi_models.classical_trajectory_work(cfg.eps_d0, A, tau, cfg.gamma_rate, T, sc)
                ref = chi_models.classical_sudden_wdf(cfg.eps_d0, A, cfg.gamma_rate, T)
                rows.append((T, tau, A, cfg.eps_d0, cfg.gamma_rate, cfg.n_samples, cfg.seed)
                            + d.moments + d.moment_stderr()
                            + (d.delta_f, d.jarzynski(1 / T), d.jarzynski_stderr(1 / T))
                            + ref.moments)
    return CLASSICAL_HEADER, rows


# --- oracle check ------------------------------------------------------------------------------

def _oracle_checks():
    """(name, callable returning residual, tolerance) for the exact-diagonalization suite."""
    two = ed_oracle.build_two_level(1.0, 1.0, 2.0)
    two0 = ed_oracle.build_two_level(1.0, 0.0, 2.0)
    rlm3 = ed_oracle.build_discretized_rlm(3, 0.5, 1.0, 2.0, eps_d=0.2)
    rlm4 = ed_oracle.build_discretized_rlm(4, 0.5, 1.0, 2.0, eps_d=0.2)
    rlm8 = ed_oracle.build_discretized_rlm(8, 0.3, 1.0, 2.0, eps_d=0.1)
    RP = lr_engine.RampProtocol

    def jarzynski():
        worst = 0.0
        for system in (two, rlm3):
            for tau in (0.0, 0.7, 3.0):
                d = ed_oracle.wdf_two_time(system, RP(0.4, tau), n_steps=64, tol=None)
                worst = max(worst, abs(d.jarzynski(system.beta) - 1))
        return worst

    def zassenhaus():
        A = 0.3
        z = ed_oracle.zassenhaus_moments(rlm8, A)
        m = ed_oracle.wdf_two_time(rlm8, RP(A, 0.0)).moments
        return max(abs(m[0] - z.m1), abs(m[1] - z.m2), abs(m[2] - z.m3 - z.dq3))

    def dq3_hse():
        A = 0.3
        z = ed_oracle.zassenhaus_moments(rlm8, A)
        return abs(z.dq3 + 0.5 * A**2 * rlm8.hse())

    def two_level_ct():
        return abs(two.c_T() - ed_oracle.two_level_cT(1.0, 1.0, 2.0))

    def chi_t():
        t = np.array([0.1, 0.5, 1.0, 2.0, 3.3])
        r = math.sqrt(5)
        ref = 2 * math.tanh(2 * r / 2) / 5 * np.sin(t * r)
        return float(np.max(np.abs(ed_oracle.response_function(two, t) - ref)))

    def dpsi_dt():
        h = 1e-5
        vals, _ = ed_oracle.relaxation_lehmann(rlm4, [0.3 - h, 0.3 + h])
        return abs((vals[1] - vals[0]) / (2 * h) + rlm4.beta * ed_oracle.response_function(rlm4, [0.3])[0])

    def maxwell():
        return ed_oracle.maxwell_check(ed_oracle.rlm_coupling_builder(4, 1.0, 2.0), 0.3, [0.5])

    def lr_scaling():
        r = ed_oracle.lr_vs_exact(rlm4, 1.0, [1e-1, 1e-2, 1e-3])
        return float(np.max(np.abs(r.exponents - 1)))

    def kappa2_positive():
        worst = 0.0
        for model in (chi_models.MajoranaRLM(1.0, 0.1), chi_models.RLM(1.0, 0.3)):
            for tau in (0.0, 1.0, 100.0):
                try:
                    v = lr_engine.cumulant(2, model, RP(1.0, tau), 1e-6).value
                except CritworkError:
                    return float('inf')
                worst = max(worst, -v)
        return max(worst, 0.0)

    def continuum_ct():
        return max(abs(lr_engine.check_cT(m)) / m.static_susceptibility()
                   for m in (chi_models.MajoranaRLM(1.0, 0.1), chi_models.RLM(1.0, 0.3)))

    return [
        ('jarzynski', jarzynski, 1e-10),
        ('zassenhaus_sudden_moments', zassenhaus, 1e-10),
        ('dq3_equals_minus_half_A2_hse', dq3_hse, 1e-9),
        ('eq5_pole_weights_rlm3', lambda: ed_oracle.verify_eq5(rlm3), 1e-10),
        ('eq5_pole_weights_two_level', lambda: ed_oracle.verify_eq5(two), 1e-10),
        ('eq5_zero_weight_two_level_x0', lambda: ed_oracle.verify_eq5(two0), 1e-10),
        ('two_level_cT_closed_form', two_level_ct, 1e-12),
        ('two_level_response_function', chi_t, 1e-10),
        ('relaxation_derivative_identity', dpsi_dt, 1e-8),
        ('maxwell_relation', maxwell, 1e-6),
        ('lr_validity_exponent', lr_scaling, 0.2),
        ('kappa2_positivity', kappa2_positive, 0.0),
        ('continuum_cT_zero', continuum_ct, 1e-4),
    ]


def cmd_oracle_check(cfg=None, threads=None):
    report = []
    for name, check, tol in _oracle_checks():
        try:
            residual = float(check())
        except CritworkError as exc:
            residual, note = float('inf'), str(exc)
        else:
            note = ''
        passed = bool(residual <= tol)
        report.append({'check': name, 'residual': residual, 'tolerance': tol,
                       'passed': passed, **({'error': note} if note else {})})
    return report


# --- entry point ------------------------------------------------------------------------------

_RUNNERS = {'crossover': cmd_crossover, 'kz-collapse': cmd_kz_collapse,
            'sudden-map': cmd_sudden_map, 'classical': cmd_classical}


def _parser():
    p = argparse.ArgumentParser(prog='critwork', description=__doc__.split('\n\n')[0])
    p.add_argument('command', choices=COMMANDS)
    p.add_argument('--config', help='INI-style configuration file')
    p.add_argument('--dump-config', action='store_true',
                   help='print the resolved configuration and exit')
    p.add_argument('--threads', type=int, help='worker processes (default: $CRITWORK_THREADS or all cores)')
    for name, (section, conv, _) in _SCHEMA.items():
        if name == 'command':
            continue
        flag = '--' + name.replace('_', '-')
        p.add_argument(flag, dest=name, metavar=name.upper(), help=f'[{section}] {name}')
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    overrides = {}
    try:
        for name, (_, conv, _) in _SCHEMA.items():
            raw = getattr(args, name, None)
            if name != 'command' and raw is not None:
                try:
                    overrides[name] = conv(raw)
                except ValueError as exc:
                    raise ConfigError(f"--{name.replace('_', '-')} {raw!r}: {exc}") from None
        cfg = build_config(args.command, args.config, overrides)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
    except (ConfigError, TypeError, DomainError) as exc:
        print(f"critwork: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.dump_config:
        sys.stdout.write(cfg.dump())
        return EXIT_OK
    try:
        if cfg.command == 'oracle-check':
            report = cmd_oracle_check(cfg)
            text = json.dumps({'checks': report, 'passed': all(r['passed'] for r in report)},
                              indent=2)
            if cfg.output in (None, '-'):
                print(text)
            else:
                Path(cfg.output).write_text(text + '\n')
            failed = [r['check'] for r in report if not r['passed']]
            if failed:
                print(f"critwork: oracle check failed: {failed[0]}", file=sys.stderr)
                return EXIT_ORACLE
            return EXIT_OK
        header, rows = _RUNNERS[cfg.command](cfg, args.threads)
        write_csv(header, rows, cfg.output)
    except ConfigError as exc:
        print(f"critwork: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CritworkError, ArithmeticError) as exc:
        print(f"critwork: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
