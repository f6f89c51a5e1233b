"""Loop analysis, legal transformations and design-space enumeration."""
from .analysis import LoopFacts, LoopInfo, analyze_loops
from .space import DesignPoint, DesignSpace, ExplorerConfig, Variant, enumerate_pragmas, enumerate_variants
from .transforms import IllegalTransform, apply_transform, staticize_bounds

__all__ = [
    "LoopFacts", "LoopInfo", "analyze_loops", "DesignPoint", "DesignSpace", "ExplorerConfig", "Variant",
    "enumerate_pragmas", "enumerate_variants", "IllegalTransform", "apply_transform", "staticize_bounds",
]
