"""Synthetic stochastic spectral simulator, dataset plumbing, preprocessing.

The simulator maps 12 parameters in [0,1] to a strictly positive flux
spectrum: a Gaussian continuum bump (amplitude, peak position, peak width
from parameters 0-2) multiplied by nine Gaussian absorption troughs whose
depths are parameters 3-11 and whose centers and widths are the fixed
constants below. Monte Carlo noise is multiplicative Gaussian per bin with
scale noise_coeff / sqrt(packet_count), floored at 5% of the mean flux, the
shape of photon-packet shot noise. Noise streams are keyed per sample index
so serial and parallel generation agree bit for bit.

Preprocessing follows the usual emulator recipe: outputs go through log10,
then both sides are standardized per column with statistics from the
training split only (population std, divide by n).
"""

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptFileError, InvalidArgumentError, UnsupportedFormatError
from .rng import derive_seed, make_generator

WAVELENGTH_LO = 3000.0
WAVELENGTH_HI = 9000.0

# Continuum bump: value ranges the three shape parameters map onto.
CONTINUUM_FLOOR = 0.2
AMPLITUDE_RANGE = (1.0, 5.0)
PEAK_RANGE = (4000.0, 7000.0)
PEAK_WIDTH_RANGE = (800.0, 2000.0)

# Absorption troughs: fixed centers/widths; depths scale with params 3..11.
LINE_CENTERS = np.array(
    [3400.0, 3900.0, 4300.0, 4900.0, 5400.0, 5900.0, 6600.0, 7200.0, 8300.0]
)
LINE_WIDTHS = np.array(
    [60.0, 90.0, 75.0, 110.0, 85.0, 100.0, 95.0, 120.0, 140.0]
)
MAX_LINE_DEPTH = 0.85

NOISE_FLOOR = 0.05

# Substream tags under the simulator seed.
PARAMS_STREAM = 1
NOISE_STREAM = 2
SPLIT_STREAM = 3

SPLIT_NAMES = ("train", "validation", "test")

PDMX_MAGIC = b"PDMX"
PDMX_VERSION = 1


@dataclass(frozen=True)
class SimulatorConfig:
    d_in: int = 12
    d_out: int = 64
    packet_count: int = 40000
    noise_coeff: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.d_in != 12:
            raise InvalidArgumentError("the simulator is defined for exactly 12 parameters")
        if self.d_out < 8:
            raise InvalidArgumentError("d_out must be >= 8")
        if self.packet_count < 1:
            raise InvalidArgumentError("packet_count must be >= 1")

    def wavelength_grid(self) -> np.ndarray:
        return np.linspace(WAVELENGTH_LO, WAVELENGTH_HI, self.d_out)

    def noise_scale(self) -> float:
        return self.noise_coeff / np.sqrt(self.packet_count)


def simulate_spectrum(
    params: np.ndarray,
    cfg: SimulatorConfig,
    draw_noise: bool = False,
    noise_key: int = 0,
) -> np.ndarray:
    """One flux spectrum; noisy draws are keyed by (cfg.seed, noise_key)."""
    p = np.asarray(params, dtype=np.float64).reshape(-1)
    if p.shape[0] != cfg.d_in:
        raise InvalidArgumentError(f"expected {cfg.d_in} parameters, got {p.shape[0]}")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise InvalidArgumentError("parameters must lie in [0, 1]")

    grid = cfg.wavelength_grid()
    amp = AMPLITUDE_RANGE[0] + (AMPLITUDE_RANGE[1] - AMPLITUDE_RANGE[0]) * p[0]
    peak = PEAK_RANGE[0] + (PEAK_RANGE[1] - PEAK_RANGE[0]) * p[1]
    width = PEAK_WIDTH_RANGE[0] + (PEAK_WIDTH_RANGE[1] - PEAK_WIDTH_RANGE[0]) * p[2]
    flux = CONTINUUM_FLOOR + amp * np.exp(-0.5 * ((grid - peak) / width) ** 2)

    depths = MAX_LINE_DEPTH * p[3:12]
    profile = np.exp(-0.5 * ((grid[:, None] - LINE_CENTERS) / LINE_WIDTHS) ** 2)
    flux = flux * np.prod(1.0 - depths * profile, axis=1)

    if draw_noise:
        rng = make_generator(derive_seed(cfg.seed, NOISE_STREAM, noise_key))
        xi = rng.standard_normal(cfg.d_out)
        flux = flux * np.maximum(1.0 + cfg.noise_scale() * xi, NOISE_FLOOR)
    return flux


@dataclass
class Dataset:
    """Raw-unit inputs/outputs plus a per-row split tag."""

    X: np.ndarray
    Y: np.ndarray
    split: np.ndarray  # array of "train" | "validation" | "test"

    def indices(self, name: str) -> np.ndarray:
        if name not in SPLIT_NAMES:
            raise InvalidArgumentError(f"unknown split {name!r}")
        return np.flatnonzero(self.split == name)

    def counts(self) -> dict[str, int]:
        return {name: int(np.sum(self.split == name)) for name in SPLIT_NAMES}


def split_counts(n: int, fractions: tuple[float, float, float]) -> tuple[int, int, int]:
    """Row counts per split: round the first two, remainder to test."""
    if len(fractions) != 3:
        raise InvalidArgumentError("fractions must have three entries")
    if any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise InvalidArgumentError("fractions must be non-negative and sum to 1")
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise InvalidArgumentError(f"n={n} leaves an empty split for fractions {fractions}")
    return n_train, n_val, n_test


def generate_dataset(
    n: int,
    cfg: SimulatorConfig,
    fractions: tuple[float, float, float] = (0.715, 0.1425, 0.1425),
) -> Dataset:
    """n uniform parameter draws, one noisy spectrum each, seeded split."""
    n_train, n_val, n_test = split_counts(n, fractions)

    X = np.empty((n, cfg.d_in))
    Y = np.empty((n, cfg.d_out))
    for i in range(n):
        rng = make_generator(derive_seed(cfg.seed, PARAMS_STREAM, i))
        X[i] = rng.random(cfg.d_in)
        Y[i] = simulate_spectrum(X[i], cfg, draw_noise=True, noise_key=i)

    perm = make_generator(derive_seed(cfg.seed, SPLIT_STREAM)).permutation(n)
    split = np.empty(n, dtype="U10")
    split[perm[:n_train]] = "train"
    split[perm[n_train:n_train + n_val]] = "validation"
    split[perm[n_train + n_val:]] = "test"
    return Dataset(X=X, Y=Y, split=split)


@dataclass
class Preprocessor:
    """Per-column standardization, with log10 on outputs when log_outputs."""

    log_outputs: bool
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray

    def transform_inputs(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.x_mean) / self.x_std

    def inverse_inputs(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z, dtype=np.float64) * self.x_std + self.x_mean

    def transform_outputs(self, Y: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, dtype=np.float64)
        if self.log_outputs:
            if not np.all(Y > 0):
                raise InvalidArgumentError("outputs must be > 0 for the log transform")
            Y = np.log10(Y)
        return (Y - self.y_mean) / self.y_std

    def inverse_outputs(self, Z: np.ndarray) -> np.ndarray:
        Y = np.asarray(Z, dtype=np.float64) * self.y_std + self.y_mean
        if self.log_outputs:
            Y = 10.0 ** Y
        return Y


def _column_stats(A: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    mean = A.mean(axis=0)
    std = A.std(axis=0)  # population (divide by n)
    zero = np.flatnonzero(std == 0)
    if zero.size:
        raise InvalidArgumentError(f"{what} column {int(zero[0])} has zero variance")
    return mean, std


def fit_preprocessor(dataset: Dataset, log_outputs: bool = True) -> Preprocessor:
    """Statistics from the training split only."""
    tr = dataset.indices("train")
    if tr.size == 0:
        raise InvalidArgumentError("dataset has no training rows")
    X = dataset.X[tr]
    Y = dataset.Y[tr]
    if log_outputs:
        if not np.all(Y > 0):
            raise InvalidArgumentError("outputs must be > 0 for the log transform")
        Y = np.log10(Y)
    x_mean, x_std = _column_stats(X, "input")
    y_mean, y_std = _column_stats(Y, "output")
    return Preprocessor(log_outputs, x_mean, x_std, y_mean, y_std)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def save_dataset_csv(dataset: Dataset, data_path, split_path) -> None:
    """Dataset CSV (x0..,y0.. headers, round-trip floats) + split CSV."""
    d_in = dataset.X.shape[1]
    d_out = dataset.Y.shape[1]
    header = [f"x{j}" for j in range(d_in)] + [f"y{j}" for j in range(d_out)]
    with open(data_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(dataset.X.shape[0]):
            writer.writerow(
                [_fmt(v) for v in dataset.X[i]] + [_fmt(v) for v in dataset.Y[i]]
            )
    with open(split_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row_index", "split"])
        for i, tag in enumerate(dataset.split):
            writer.writerow([i, tag])


def load_dataset_csv(data_path, split_path) -> Dataset:
    with open(data_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d_in = sum(1 for name in header if name.startswith("x"))
        d_out = len(header) - d_in
        if d_in == 0 or d_out == 0:
            raise CorruptFileError(f"{data_path}: header has no x/y columns")
        rows = [[float(v) for v in row] for row in reader]
    X = np.array([r[:d_in] for r in rows], dtype=np.float64).reshape(len(rows), d_in)
    Y = np.array([r[d_in:] for r in rows], dtype=np.float64).reshape(len(rows), d_out)

    split = np.empty(len(rows), dtype="U10")
    seen = 0
    with open(split_path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            idx, tag = int(row[0]), row[1]
            if tag not in SPLIT_NAMES:
                raise CorruptFileError(f"{split_path}: unknown split tag {tag!r}")
            if not 0 <= idx < len(rows):
                raise CorruptFileError(f"{split_path}: row index {idx} out of range")
            split[idx] = tag
            seen += 1
    if seen != len(rows):
        raise CorruptFileError(f"{split_path}: covers {seen} of {len(rows)} rows")
    return Dataset(X=X, Y=Y, split=split)


def save_matrix_pdmx(matrix: np.ndarray, path) -> None:
    """Binary matrix: PDMX magic, u64 LE version/rows/cols, f64 LE row-major."""
    a = np.ascontiguousarray(matrix, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidArgumentError("PDMX stores 2-D matrices only")
    with open(path, "wb") as fh:
        fh.write(PDMX_MAGIC)
        fh.write(struct.pack("<QQQ", PDMX_VERSION, a.shape[0], a.shape[1]))
        fh.write(a.astype("<f8").tobytes(order="C"))


def load_matrix_pdmx(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != PDMX_MAGIC:
            raise UnsupportedFormatError(f"{path}: bad magic {magic!r}")
        head = fh.read(24)
        if len(head) != 24:
            raise CorruptFileError(f"{path}: truncated header")
        version, rows, cols = struct.unpack("<QQQ", head)
        if version != PDMX_VERSION:
            raise UnsupportedFormatError(f"{path}: unsupported version {version}")
        payload = fh.read(rows * cols * 8)
        if len(payload) != rows * cols * 8:
            raise CorruptFileError(f"{path}: truncated payload")
        if fh.read(1):
            raise CorruptFileError(f"{path}: trailing bytes after payload")
    return np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(rows, cols)
