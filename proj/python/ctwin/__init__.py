"""MISO-OFDM digital-twin precoding simulation toolkit.

Thin re-export of the compiled extension.  The heavy lifting (ray tracing,
dataset builds, corrector training, Monte-Carlo BER) lives in C++; this
package exposes it with numpy arrays at the boundary.
"""

from ctwin._core import (
    Dataset,
    DimensionError,
    MaterialRegistry,
    Model,
    NumericError,
    PathList,
    Scene,
    StateError,
    build_dataset,
    channel_normalization,
    demap_symbols,
    evaluate_cases,
    fresnel_integrals,
    knife_edge_diffraction,
    load_checkpoint,
    load_dataset,
    load_materials,
    load_scene,
    map_bits,
    nmse_db,
    ofdm_demodulate,
    ofdm_modulate,
    q_function,
    qpsk_constellation,
    run_nmse_report,
    simulate_ber,
    trace,
    train_corrector,
)

__all__ = [
    "Dataset",
    "DimensionError",
    "MaterialRegistry",
    "Model",
    "NumericError",
    "PathList",
    "Scene",
    "StateError",
    "build_dataset",
    "channel_normalization",
    "demap_symbols",
    "evaluate_cases",
    "fresnel_integrals",
    "knife_edge_diffraction",
    "load_checkpoint",
    "load_dataset",
    "load_materials",
    "load_scene",
    "map_bits",
    "nmse_db",
    "ofdm_demodulate",
    "ofdm_modulate",
    "q_function",
    "qpsk_constellation",
    "run_nmse_report",
    "simulate_ber",
    "trace",
    "train_corrector",
]
