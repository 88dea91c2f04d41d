__all__ = ['ExperimentSection', 'DataSection', 'AutoencoderSection', 'IntegratorSection', 'RolloutSection',
           'EvalSection', 'SweepSection', 'ExperimentConfig', 'SWEEP_AXES']

# Internal Cell
#exporti
import os
from configparser import ConfigParser
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Tuple

from .datagen import PDE_FIELDS, GridSpec
from .decomp import NeighborPolicy
from .shared import ConfigError

SWEEP_AXES = ('latent', 'th', 'train_window')

# Cell
@dataclass
class ExperimentSection:
    name: str = 'experiment'
    seed: int = 0
    out: str = 'runs/experiment'


@dataclass
class DataSection:
    """
    Dataset definition. `pde` is one of the generators or 'external' (read splits from `path`).
    Generator constants left blank use the generator defaults.
    """
    pde: str = 'diffusion_reaction'
    path: str = ''
    extents: Tuple[int, ...] = (32, 32)
    lengths: Tuple[float, ...] = (2.0, 2.0)
    dt: float = 0.01
    n_steps: int = 60
    stride: int = 5
    n_train: int = 20
    n_test: int = 5
    augment: bool = False
    solution_fields: Tuple[str, ...] = ()
    condition_fields: Tuple[str, ...] = ()
    D_u: Optional[float] = None
    D_v: Optional[float] = None
    k: Optional[float] = None
    g: Optional[float] = None
    r_c: Optional[float] = None
    q0: Optional[float] = None
    sigma: Optional[float] = None
    conductivity: Optional[float] = None
    density: Optional[float] = None
    heat_capacity: Optional[float] = None
    T0: Optional[float] = None
    n_modes: Optional[int] = None


@dataclass
class AutoencoderSection:
    p: int = 8
    latent: int = 16
    condition_latent: Optional[int] = None
    channels: Tuple[int, ...] = (16, 32)
    kernel: int = 3
    activation: str = 'tanh'
    epochs: int = 100
    batch_size: int = 64
    lr: float = 1e-3
    val_fraction: float = 0.1
    max_patches: int = 0


@dataclass
class IntegratorSection:
    th: int = 10
    d_gamma: int = 64
    hidden: Tuple[int, ...] = (128, 128)
    activation: str = 'relu'
    policy: str = 'zero'
    residual: bool = False
    K: int = 10
    loss_space: str = 'latent'
    warmup: int = 10
    eps_min: float = 0.0
    epochs: int = 100
    lr: float = 1e-3
    window_stride: int = 1
    train_window: Optional[int] = None
    batch_windows: int = 1
    resume: bool = False


@dataclass
class RolloutSection:
    """
    `boundary` lists directives per axis, e.g. '0:periodic, 1:dirichlet'; `dirichlet` gives the boundary
    values, e.g. 'u=1.0, v=0.0'. `decode` lists frames to decode (blank decodes all).
    """
    horizon: Optional[int] = None
    extents: Tuple[int, ...] = ()
    boundary: str = ''
    dirichlet: str = ''
    decode: Tuple[int, ...] = ()
    ppm: bool = False
    ppm_z: int = -1


@dataclass
class EvalSection:
    T_melt: Optional[float] = None
    plots: bool = False


@dataclass
class SweepSection:
    axis: str = ''
    values: Tuple[int, ...] = ()

# Internal Cell
_SECTIONS = (('experiment', ExperimentSection), ('data', DataSection), ('autoencoder', AutoencoderSection),
             ('integrator', IntegratorSection), ('rollout', RolloutSection), ('eval', EvalSection),
             ('sweep', SweepSection))


def _parse(text, kind, where):
    text = text.strip()
    try:
        if kind in (bool,):
            if text.lower() in ('1', 'true', 'yes', 'on'):
                return True
            if text.lower() in ('0', 'false', 'no', 'off'):
                return False
            raise ValueError(text)
        if kind in (int, float, str):
            return kind(text)
        if kind in (Optional[int], Optional[float]):
            if text == '':
                return None
            return (int if kind == Optional[int] else float)(text)
        if kind in (Tuple[int, ...], Tuple[float, ...], Tuple[str, ...]):
            item = {Tuple[int, ...]: int, Tuple[float, ...]: float, Tuple[str, ...]: str}[kind]
            return tuple(item(s.strip()) for s in text.split(',') if s.strip())
    except ValueError:
        raise ConfigError('Error: cannot read {} = {!r} as {}'.format(where, text, kind))
    raise ConfigError('Error: unsupported setting type for ' + where)


def _format(value):
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, tuple):
        return ', '.join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)

# Cell
@dataclass
class ExperimentConfig:
    """
    One experiment: an INI file with sections [experiment] [data] [autoencoder] [integrator] [rollout]
    [eval] [sweep]. Missing keys take the defaults above; unknown keys are an error.
    """
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    data: DataSection = field(default_factory=DataSection)
    autoencoder: AutoencoderSection = field(default_factory=AutoencoderSection)
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    rollout: RolloutSection = field(default_factory=RolloutSection)
    eval: EvalSection = field(default_factory=EvalSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    @classmethod
    def from_parser(cls, parser):
        kwargs = {}
        for name, section_cls in _SECTIONS:
            values = {}
            known = {f.name: f for f in fields(section_cls)}
            if parser.has_section(name):
                for key, text in parser.items(name):
                    if key not in known:
                        raise ConfigError('Error: unknown setting [{}] {}'.format(name, key))
                    values[key] = _parse(text, known[key].type, '[{}] {}'.format(name, key))
            kwargs[name] = section_cls(**values)
        for extra in parser.sections():
            if extra not in dict(_SECTIONS):
                raise ConfigError('Error: unknown section [{}]'.format(extra))
        return cls(**kwargs)

    @classmethod
    def read(cls, path):
        if not os.path.exists(path):
            raise ConfigError('Error: config file {} does not exist'.format(path))
        parser = ConfigParser(delimiters=['='], interpolation=None)
        parser.optionxform = str
        parser.read(path, encoding='utf-8')
        return cls.from_parser(parser)

    def to_parser(self):
        parser = ConfigParser(delimiters=['='], interpolation=None)
        parser.optionxform = str
        for name, _ in _SECTIONS:
            section = getattr(self, name)
            parser[name] = {f.name: _format(getattr(section, f.name)) for f in fields(section)}
        return parser

    def write(self, path):
        with open(path, 'w', encoding='utf-8') as fl:
            self.to_parser().write(fl)

    def with_overrides(self, seed=None, out=None):
        exp = self.experiment
        exp = replace(exp, seed=exp.seed if seed is None else int(seed), out=exp.out if out is None else out)
        return replace(self, experiment=exp)

    @property
    def dims(self):
        return len(self.data.extents)

    def roster(self):
        """(solution field names, condition field names)."""
        if self.data.solution_fields:
            return tuple(self.data.solution_fields), tuple(self.data.condition_fields)
        if self.data.pde in PDE_FIELDS:
            return PDE_FIELDS[self.data.pde]
        return (), ()

    def latent_of(self, name):
        _, conds = self.roster()
        if name in conds and self.autoencoder.condition_latent is not None:
            return self.autoencoder.condition_latent
        return self.autoencoder.latent

    def grid(self):
        d = self.data
        return GridSpec(d.extents, d.lengths, d.dt, d.n_steps, d.stride)

    def test_grid(self):
        """
        Grid of the test split: [rollout] extents (same cell size) and th + horizon frames when set.
        """
        d, ro = self.data, self.rollout
        extents = ro.extents if ro.extents else d.extents
        lengths = tuple(L * n / n0 for L, n, n0 in zip(d.lengths, extents, d.extents))
        n_steps = d.n_steps if ro.horizon is None else self.integrator.th + ro.horizon
        return GridSpec(extents, lengths, d.dt, n_steps, d.stride)

    def generator_params(self):
        """Keyword arguments of the generator; blank constants are left to the generator defaults."""
        d = self.data
        keys = {'diffusion_reaction': ('D_u', 'D_v', 'k'),
                'swe': ('g', 'r_c'),
                'heat_laser': ('q0', 'sigma', 'conductivity', 'density', 'heat_capacity', 'T0'),
                'constant': ('n_modes',)}.get(d.pde, ())
        return {k: getattr(d, k) for k in keys if getattr(d, k) is not None}

    def boundary_directives(self):
        """[(axis, kind)] parsed from [rollout] boundary."""
        out = []
        for item in [s.strip() for s in self.rollout.boundary.split(',') if s.strip()]:
            axis, _, kind = item.partition(':')
            try:
                out.append((int(axis), kind.strip()))
            except ValueError:
                raise ConfigError('Error: boundary directive {!r} is not axis:kind'.format(item))
        return out

    def dirichlet_values(self):
        out = {}
        for item in [s.strip() for s in self.rollout.dirichlet.split(',') if s.strip()]:
            name, _, value = item.partition('=')
            try:
                out[name.strip()] = float(value)
            except ValueError:
                raise ConfigError('Error: Dirichlet value {!r} is not field=number'.format(item))
        return out

    def validate(self):
        """
        Check every setting and every width relation between modules; raise ConfigError listing all problems.
        """
        errors = []
        d, ae, ti, ro, sw = self.data, self.autoencoder, self.integrator, self.rollout, self.sweep
        dims = self.dims

        if d.pde not in tuple(PDE_FIELDS) + ('external',):
            errors.append('[data] pde must be one of {}, got {!r}'.format(tuple(PDE_FIELDS) + ('external',), d.pde))
        if d.pde == 'external' and not d.path:
            errors.append('[data] path is required for external data')
        if d.path and not os.path.isdir(d.path):
            errors.append('[data] path {} does not exist'.format(d.path))
        if d.pde == 'external' and not d.solution_fields:
            errors.append('[data] solution_fields are required for external data')
        try:
            self.grid()
        except ValueError as e:
            errors.append('[data] ' + str(e))
        if d.pde == 'swe' and dims != 2:
            errors.append('[data] the swe generator is 2-D')
        if d.pde == 'heat_laser' and dims != 3:
            errors.append('[data] the heat_laser generator is 3-D')
        if d.augment and len(d.extents) >= 2 and d.extents[0] != d.extents[1]:
            errors.append('[data] augment needs N_x == N_y for rotate90_z')
        if d.n_train < 1 or d.n_test < 1:
            errors.append('[data] n_train and n_test must be >= 1')

        if ae.p < 1 or any(n % ae.p for n in d.extents):
            errors.append('[autoencoder] p={} must divide every grid extent {}'.format(ae.p, d.extents))
        if not ae.channels or ae.p % (2 ** len(ae.channels)):
            errors.append('[autoencoder] p={} must be divisible by 2^{} (one stride-2 stage per channel width)'
                          .format(ae.p, len(ae.channels)))
        if ae.latent < 1 or (ae.condition_latent is not None and ae.condition_latent < 1):
            errors.append('[autoencoder] latent sizes must be >= 1')
        if ae.activation not in ('tanh', 'relu', 'identity') or ti.activation not in ('tanh', 'relu', 'identity'):
            errors.append('activations must be tanh, relu or identity')
        if not 0 <= ae.val_fraction < 1:
            errors.append('[autoencoder] val_fraction must lie in [0, 1)')

        if ti.th < 1 or ti.d_gamma < 1 or ti.K < 1:
            errors.append('[integrator] th, d_gamma and K must be >= 1')
        if d.n_steps < ti.th + 1:
            errors.append('[integrator] th={} needs n_steps >= {}, got {}'.format(ti.th, ti.th + 1, d.n_steps))
        if ti.train_window is not None and not ti.th + 1 <= ti.train_window <= d.n_steps:
            errors.append('[integrator] train_window must lie in [th+1, n_steps] = [{}, {}]'.format(ti.th + 1, d.n_steps))
        if ti.loss_space not in ('latent', 'decoded'):
            errors.append("[integrator] loss_space must be 'latent' or 'decoded'")
        if not 0. <= ti.eps_min <= 1. or ti.warmup < 0 or ti.epochs < 1:
            errors.append('[integrator] need 0 <= eps_min <= 1, warmup >= 0, epochs >= 1')
        if ti.window_stride < 1 or ti.batch_windows < 1:
            errors.append('[integrator] window_stride and batch_windows must be >= 1')
        try:
            NeighborPolicy.parse(ti.policy, dims)
        except ValueError as e:
            errors.append("[integrator] " + str(e))

        sols, conds = self.roster()
        if not sols:
            errors.append('no solution fields for pde {!r}'.format(d.pde))

        if ro.horizon is not None and ro.horizon < 1:
            errors.append('[rollout] horizon must be >= 1')
        if ro.extents:
            if len(ro.extents) != dims:
                errors.append('[rollout] extents {} must be {}-D'.format(ro.extents, dims))
            elif any(n % ae.p for n in ro.extents):
                errors.append('[rollout] extents {} must be divisible by p={}'.format(ro.extents, ae.p))
        try:
            directives = self.boundary_directives()
            values = self.dirichlet_values()
        except ConfigError as e:
            errors.append(str(e)[len('Error: '):])
            directives, values = [], {}
        for axis, kind in directives:
            if not 0 <= axis < dims or kind not in ('none', 'periodic', 'dirichlet'):
                errors.append('[rollout] bad boundary directive {}:{}'.format(axis, kind))
        if any(k == 'dirichlet' for _, k in directives) and not values:
            errors.append('[rollout] dirichlet boundary needs [rollout] dirichlet values')
        for name in values:
            if name not in sols:
                errors.append('[rollout] Dirichlet value for {}, which is not a solution field'.format(name))

        if sw.axis and sw.axis not in SWEEP_AXES:
            errors.append('[sweep] axis must be one of {}'.format(SWEEP_AXES))
        if sw.axis and not sw.values:
            errors.append('[sweep] values are required when axis is set')
        if sw.axis == 'th' and sw.values and max(sw.values) + 1 > d.n_steps:
            errors.append('[sweep] th values need n_steps > th')

        if errors:
            raise ConfigError('Error: invalid configuration:\n  ' + '\n  '.join(errors))
        return self

    def paths(self):
        """Output locations under [experiment] out."""
        out = self.experiment.out
        data = self.data.path if self.data.path else os.path.join(out, 'data')
        return {'out': out,
                'train': os.path.join(data, 'train'),
                'test': os.path.join(data, 'test'),
                'checkpoints': os.path.join(out, 'checkpoints'),
                'predictions': os.path.join(out, 'predictions'),
                'reports': os.path.join(out, 'reports'),
                'plots': os.path.join(out, 'plots'),
                'ppm': os.path.join(out, 'ppm')}
