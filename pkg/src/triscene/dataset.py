"""Dataset container tying scenes to their category/provider registries."""

from dataclasses import dataclass, field

from .errors import DataError


@dataclass(frozen=True)
class SegProviderInfo:
    provider_id: int
    class_names: dict  # id -> name
    background_id: int


@dataclass(frozen=True)
class DetProviderInfo:
    provider_id: int
    class_names: dict  # id -> name
    vocabulary_size: int


@dataclass
class SceneDataset:
    scenes: list
    category_names: tuple
    seg_providers: tuple
    det_providers: tuple
    image_size: tuple  # (n_x, n_y)
    world: dict = None  # generator spec echo, when synthetic
    recorded_levels: tuple = field(default_factory=tuple)

    def __post_init__(self):
        self.category_names = tuple(self.category_names)
        n = len(self.category_names)
        for scene in self.scenes:
            if scene.label >= n:
                raise DataError(
                    f"dataset: scene {scene.scene_id} label {scene.label} >= "
                    f"{n} categories"
                )

    @property
    def n_categories(self):
        return len(self.category_names)

    @property
    def vocab_sizes(self):
        return tuple(p.vocabulary_size for p in self.det_providers)

    def split(self, name):
        return [s for s in self.scenes if s.split == name]

    def by_id(self, scene_id):
        for s in self.scenes:
            if s.scene_id == scene_id:
                return s
        raise DataError(f"dataset: no scene with id {scene_id}")
