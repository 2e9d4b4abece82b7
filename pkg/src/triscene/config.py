"""Engine configuration and the shipped reference world.

EngineConfig is plain data with a lossless JSON round-trip; everything the
pipeline does is a function of (config, dataset). The reference world is a
small 8-category universe with one background-confusable and one
object-confusable pair, so each representation level has a known blind
spot and ensembling them is genuinely complementary.
"""

import json
from dataclasses import asdict, dataclass, field

from .errors import ConfigError
from .synthetic import (
    CategorySpec,
    DetProviderSpec,
    ObjectType,
    SegProviderSpec,
    SyntheticWorldSpec,
    spec_from_dict,
    spec_to_dict,
)

LEVEL_ORDER = ("low", "mid", "high")
DEFAULT_ALPHA_GRID = (1.0, 1.5, 2.0, 2.5, 3.0)


@dataclass
class EngineConfig:
    rng_seed: int = 0
    dataset_path: str = None
    output_dir: str = None
    world: SyntheticWorldSpec = None
    n_per_category: int = 100
    split_ratios: tuple = (0.7, 0.15, 0.15)
    active_levels: tuple = ("low", "mid", "high")
    # per level: tuple of hidden-layer tuples, one per discriminator
    hidden_sizes: dict = field(default_factory=lambda: {
        "low": ((48,), (96,)),
        "mid": ((48,), (96,)),
        "high": ((16,), (32,)),
    })
    pool: dict = field(default_factory=lambda: {"low": 8, "mid": 8})
    epochs: int = 150
    batch_size: int = 32
    learning_rate: float = 0.3
    meta_epochs: int = 300
    meta_learning_rate: float = 0.1
    meta_hidden_factor: int = 4
    alpha_grid: tuple = DEFAULT_ALPHA_GRID
    occlusion_window: int = None  # None: image width // 8
    occlusion_stride: int = None  # None: window // 2

    def validate(self):
        if not self.active_levels:
            raise ConfigError("config: active_levels must not be empty")
        for level in self.active_levels:
            if level not in LEVEL_ORDER:
                raise ConfigError(f"config: unknown level {level!r}")
            if level not in self.hidden_sizes:
                raise ConfigError(f"config: no architectures configured for {level!r}")
        for a in self.alpha_grid:
            if not 1.0 <= a <= 3.0:
                raise ConfigError(f"config: alpha {a} outside [1, 3]")
        if len(self.split_ratios) != 3 or abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ConfigError(f"config: bad split ratios {self.split_ratios}")
        return self

    def ordered_active(self):
        return tuple(l for l in LEVEL_ORDER if l in self.active_levels)

    def to_dict(self):
        d = asdict(self)
        d["world"] = spec_to_dict(self.world) if self.world is not None else None
        return d


def config_from_dict(d):
    d = dict(d)
    world = d.get("world")
    cfg = EngineConfig(
        rng_seed=d["rng_seed"],
        dataset_path=d.get("dataset_path"),
        output_dir=d.get("output_dir"),
        world=spec_from_dict(world) if world is not None else None,
        n_per_category=d["n_per_category"],
        split_ratios=tuple(d["split_ratios"]),
        active_levels=tuple(d["active_levels"]),
        hidden_sizes={
            k: tuple(tuple(h) for h in v) for k, v in d["hidden_sizes"].items()
        },
        pool=dict(d["pool"]),
        epochs=d["epochs"],
        batch_size=d["batch_size"],
        learning_rate=d["learning_rate"],
        meta_epochs=d["meta_epochs"],
        meta_learning_rate=d["meta_learning_rate"],
        meta_hidden_factor=d["meta_hidden_factor"],
        alpha_grid=tuple(d["alpha_grid"]),
        occlusion_window=d.get("occlusion_window"),
        occlusion_stride=d.get("occlusion_stride"),
    )
    return cfg


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(cfg.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


def load_config(path):
    try:
        with open(path, encoding="utf-8") as f:
            return config_from_dict(json.load(f))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"config: cannot parse {path}: {exc}") from exc


# -- reference world ---------------------------------------------------------

def reference_world(rng_seed=1234):
    """Fixed synthetic universe used by the shipped reference configuration.

    Categories 0/1 share a background palette and object color but differ
    in object identity (pixel statistics barely separate them); categories
    2/3 share the object profile exactly and differ only in background
    palette (object counts cannot separate them).
    """
    object_types = (
        ObjectType("crate", "square", "silver", (9, 13)),
        ObjectType("drum", "circle", "silver", (10, 15)),
        ObjectType("plant", "triangle", "green", (10, 15)),
        ObjectType("buoy", "circle", "red", (8, 12)),
        ObjectType("boat", "square", "white", (10, 14)),
        ObjectType("fruit", "circle", "yellow", (7, 10)),
        ObjectType("tool", "plus", "blue", (9, 13)),
        ObjectType("bench", "square", "maroon", (10, 14)),
        ObjectType("ball", "circle", "magenta", (8, 12)),
        ObjectType("frame", "diamond", "teal", (10, 14)),
    )
    categories = (
        CategorySpec("depot", (95, 105, 118), 8, {"crate": (2, 4)}),
        CategorySpec("drumyard", (95, 105, 118), 8, {"drum": (2, 4)}),
        CategorySpec("greenhouse", (150, 190, 140), 8, {"plant": (2, 5)}),
        CategorySpec("terrace", (205, 180, 140), 8, {"plant": (2, 5)}),
        CategorySpec("harbor", (40, 60, 100), 8, {"buoy": (1, 3), "boat": (1, 2)}),
        CategorySpec("orchard", (120, 135, 70), 8, {"fruit": (3, 6)}),
        CategorySpec("workshop", (115, 108, 104), 8, {"tool": (1, 4), "bench": (1, 2)}),
        CategorySpec("playground", (155, 115, 170), 8, {"ball": (2, 4), "frame": (1, 2)}),
    )
    names = [ot.name for ot in object_types]
    seg_providers = (
        SegProviderSpec(provider_id=0, class_ids={n: i + 1 for i, n in enumerate(names)}),
        SegProviderSpec(provider_id=1, class_ids={n: len(names) - i for i, n in enumerate(names)}),
    )
    det_providers = (
        DetProviderSpec(provider_id=0, vocabulary=("crate", "drum", "plant", "buoy", "fruit", "tool", "ball")),
        DetProviderSpec(provider_id=1, vocabulary=tuple(reversed(names))),
    )
    return SyntheticWorldSpec(
        categories=categories,
        object_types=object_types,
        seg_providers=seg_providers,
        det_providers=det_providers,
        image_size=(64, 64),
        rng_seed=rng_seed,
        background_confusable=((0, 1),),
        object_confusable=((2, 3),),
    )


def reference_config():
    """The in-repo acceptance configuration: reference world, fixed seed."""
    return EngineConfig(rng_seed=7, world=reference_world())


def full_scale_config():
    """Preset mirroring a large-backbone deployment: two wide single-hidden
    fully-connected discriminators (4096/8192) on the object-count level."""
    cfg = reference_config()
    cfg.hidden_sizes = {
        "low": ((2048,), (3072,)),
        "mid": ((2048,), (3072,)),
        "high": ((4096,), (8192,)),
    }
    return cfg
