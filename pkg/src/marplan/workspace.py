"""Navigation view of a scene: which patch cells a disc agent may occupy."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import ndimage

from .grid import GridSpec, disc_mask, disc_mask_squares, static_mask
from .scene import AGENT_RADIUS, Obstacle, RasterConfig, Scene
from .world import binary_occupancy

DENSITY_WINDOW = 5


@lru_cache(maxsize=64)
def _static_cached(arena_size: float, n: int, obstacles: tuple[Obstacle, ...], clearance: float) -> np.ndarray:
    m = static_mask(GridSpec(arena_size, n), obstacles, clearance)
    m.setflags(write=False)
    return m


class Workspace:
    """Grid-level blocking masks for one scene.

    * static cells: closer than an agent radius to an obstacle or wall (square-conservative)
    * object zones: cell centers within agent radius + object radius of an object center
    * agent zones: cell squares within two agent radii of another agent
    """

    def __init__(self, scene: Scene, raster: RasterConfig = RasterConfig()):
        self.scene = scene
        self.raster = raster
        self.spec = GridSpec.from_raster(scene.arena_size, raster)
        self.agent_radius = max([g.radius for g in scene.agents], default=AGENT_RADIUS)
        self.static = _static_cached(scene.arena_size, self.spec.n, scene.obstacles, self.agent_radius)
        self.object_cells = {o.id: self.spec.cell_of(o.position) for o in scene.objects}
        self.object_masks = {
            o.id: disc_mask(self.spec, [o.position], self.agent_radius + o.radius) for o in scene.objects
        }
        self._object_count = np.zeros(self.spec.shape, dtype=np.int32)
        for m in self.object_masks.values():
            self._object_count += m
        self._density = None

    def agent_cell(self, agent_id: int) -> tuple[int, int]:
        return self.spec.cell_of(self.scene.agent(agent_id).position)

    def objects_blocked(self, exclude=()) -> np.ndarray:
        count = self._object_count.copy()
        for oid in exclude:
            count -= self.object_masks[oid]
        return count > 0

    def exempt_objects(self, agent_id: int) -> tuple[int, ...]:
        """Objects whose zone covers the agent's own cell (typically the one it just set
        down); the agent may drive off them."""
        cell = self.agent_cell(agent_id)
        return tuple(oid for oid, m in self.object_masks.items() if m[cell])

    def blocked_for(self, agent_id: int | None = None, exclude_objects=()) -> np.ndarray:
        """Static cells plus object zones, minus the excluded objects and (for an agent)
        the objects it is standing on."""
        exclude = set(exclude_objects)
        if agent_id is not None:
            exclude.update(self.exempt_objects(agent_id))
        return self.static | self.objects_blocked(sorted(exclude))

    def agent_zone(self, positions, radius_sum: float | None = None) -> np.ndarray:
        if radius_sum is None:
            radius_sum = 2.0 * self.agent_radius
        return disc_mask_squares(self.spec, positions, radius_sum)

    def density(self) -> np.ndarray:
        """Occupancy fraction of the 5x5-patch neighborhood around every patch (pixels of
        obstacles and objects; the window is clipped at the border)."""
        if self._density is None:
            self._density = neighborhood_density(binary_occupancy(self.scene, self.raster), self.raster.patch_size)
        return self._density


def neighborhood_density(occupancy: np.ndarray, patch: int, window: int = DENSITY_WINDOW) -> np.ndarray:
    n = occupancy.shape[0] // patch
    counts = occupancy.reshape(n, patch, n, patch).sum(axis=(1, 3)).astype(np.int64)
    kernel = np.ones((window, window), dtype=np.int64)
    # integer sums keep the result exactly symmetric under flips and rotations
    occ_sum = ndimage.convolve(counts, kernel, mode="constant", cval=0)
    valid = ndimage.convolve(np.full((n, n), patch * patch, dtype=np.int64), kernel, mode="constant", cval=0)
    return occ_sum / valid
