"""Tree-based place recognition and 6-DoF localization from digital forest inventories."""
from .config import CoarseConfig, HashConfig, MatchConfig, PipelineConfig, PoseConfig
from .geometry import RigidTransform
from .inventory import GlobalInventory, Inventory, TreeRecord, parse_inventory, radius_query, serialize_inventory
from .pipeline import (DescriptorDatabase, LocalizationResult, build_database, build_grid_database,
                       estimate_pose, export_constraints, fuse_sessions, load_database, localize, save_database)
from .synthetic import ForestParams, PerturbationParams, generate_forest, perturb_scene

__all__ = [
    "CoarseConfig", "HashConfig", "MatchConfig", "PipelineConfig", "PoseConfig", "RigidTransform",
    "GlobalInventory", "Inventory", "TreeRecord", "parse_inventory", "radius_query", "serialize_inventory",
    "DescriptorDatabase", "LocalizationResult", "build_database", "build_grid_database", "estimate_pose",
    "export_constraints", "fuse_sessions", "load_database", "localize", "save_database",
    "ForestParams", "PerturbationParams", "generate_forest", "perturb_scene",
]
