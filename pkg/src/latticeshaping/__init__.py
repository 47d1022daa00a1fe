"""Lattice codes with low-dimensional Voronoi shaping.

Two constructions share one LDLC coding lattice family:

* systematic Voronoi shaping (:class:`SystematicVoronoiCode`)
* mixed nested lattice codes (:class:`MixedNestedCode`), which also support
  compute-and-forward over a multiple-access channel.

Hot loops run in a compiled extension when it was built; ``BACKEND`` tells
which one is active.
"""

from ._backend import BACKEND
from .codes import MixedNestedCode, SystematicVoronoiCode, make_code
from .coding import CodingLatticeSpec
from .errors import (
    ArgumentError,
    ConstructionError,
    CorruptionError,
    LatticeError,
    NumericalRegimeError,
    SpecificationError,
    TruncationError,
)
from .harness import (
    CodeParams,
    ExperimentResult,
    awgn,
    build_code,
    mac,
    run_cf,
    run_huffman_rate,
    run_quantize_selftest,
    run_ser,
    run_shaping_gain,
)
from .huffman import huffman_bits_to_integers, huffman_build, huffman_integers_to_bits, mixture_rate
from .lattices import (
    LatticeKind,
    LatticeMetrics,
    NamedLattice,
    brute_force_nearest,
    estimate_metrics,
    mod_lattice,
    quantize_nearest,
    quantize_scaled,
)
from .ldlc import DecoderConfig, DecoderPrior, LdlcDecoder, build_ldlc, cf_prior, flat_prior, map_prior_p2p
from .mixed import cf_decode, mixed_decode_p2p, mixed_encode, modulo_sum, phi_inverse
from .shaping import (
    DitherMode,
    ShapingLatticeSpec,
    make_dither,
    map_to_parallelepiped,
    shaping_preset,
    voronoi_encode,
    voronoi_reverse,
)
from .sysenc import systematic_encode, systematic_round

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
