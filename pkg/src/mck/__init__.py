"""Leveled Morse graphs on the sphere and their handle complexes."""

from .permutohedron import (
    OrderedPartition, PermFace, ZeroCochain, enumerate_partitions, face_of,
    refines, refines_eq, composition_signature, partition_of_values,
    induced_face_automorphism,
)
from .morse_graph import (
    Atom, Cap, LMG, validate, invariants, canonical_form, decode_canonical,
    automorphisms, to_json, from_json, to_dot, mirror, dual,
)
from .perturbation import (
    Refinement, Resolution, resolution, split_level, delta, delta_direct,
    merge_all_levels,
)
from .twist_algebra import (
    HomologyModel, Transvection, CircleClassification, UPolytope,
    homology_model, transvections, classify_circles, u_polytope,
    check_stab_action, algebra_json, double_factorial_bound,
)
from .complex_builder import (
    MarkingSpec, HandleRecord, ComplexK, enumerate_top_classes,
    enumerate_classes_direct, build_complex, euler_characteristic,
    q_polynomial, morse_smale_report, complex_dimension, complex_rank,
    betti0,
)

__all__ = [name for name in dir() if not name.startswith("_")]
