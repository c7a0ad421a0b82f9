"""On-disk checkpoints: a JSON manifest plus one ``.npz`` per slab."""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import UnsupportedConfigurationError
from .forward import DgSolution, make_slab
from .mesh import build_interval_mesh, build_space, build_square_mesh
from .timebasis import TimePartition, make_time_basis

logger = logging.getLogger(__name__)

MANIFEST = 'checkpoint.json'
FORMAT_VERSION = 1


def _slab_file(n: int) -> str:
    return f'slab_{n:04d}.npz'


def save_checkpoint(sol: DgSolution, directory, meta: Optional[dict] = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    mesh, basis = sol.space.mesh, sol.basis
    manifest = {
        'format_version': FORMAT_VERSION,
        'label': sol.label,
        'direction': sol.direction,
        'k': basis.degree_k,
        'time_points': len(basis.points),
        'under_integrated': basis.under_integrated,
        'l': sol.space.degree_l,
        'space_order': sol.space.quadrature.degree,
        'N': sol.n_slabs,
        'n': mesh.cells_per_side,
        'mesh': {'kind': mesh.kind, 'bounds': [list(b) for b in mesh.bounds],
                 'cells_per_side': mesh.cells_per_side},
        'endpoints': sol.partition.endpoints.tolist(),
        'slabs': [],
        **(meta or {}),
    }
    np.savez(directory / 'initial.npz', initial=sol.initial)
    for slab in sol.slabs:
        name = _slab_file(slab.slab_index)
        np.savez(directory / name, coefficients=slab.coefficients, incoming=slab.incoming)
        manifest['slabs'].append(name)
    with open(directory / MANIFEST, 'w') as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    logger.info('checkpoint written to %s (%d slabs)', directory, sol.n_slabs)
    return directory / MANIFEST


def load_checkpoint(directory) -> DgSolution:
    """Rebuild a solution from a checkpoint without solving anything."""
    directory = Path(directory)
    with open(directory / MANIFEST) as fh:
        manifest = json.load(fh)
    if manifest.get('format_version') != FORMAT_VERSION:
        raise UnsupportedConfigurationError('unknown checkpoint format',
                                            format_version=manifest.get('format_version'))
    mesh_info = manifest['mesh']
    if mesh_info['kind'] == 'interval':
        (a, b), = mesh_info['bounds']
        mesh = build_interval_mesh(a, b, mesh_info['cells_per_side'])
    else:
        mesh = build_square_mesh(mesh_info['cells_per_side'])
    space = build_space(mesh, manifest['l'], manifest['space_order'])
    basis = make_time_basis(manifest['k'], manifest['time_points'],
                            allow_under_integration=manifest['under_integrated'])
    partition = TimePartition.from_endpoints(manifest['endpoints'])
    slabs = []
    for n, name in enumerate(manifest['slabs'], start=1):
        with np.load(directory / name) as data:
            t_start, tau = partition.slab(n)
            slabs.append(make_slab(basis, n, t_start, tau, data['coefficients'], data['incoming'],
                                   direction=manifest['direction']))
    with np.load(directory / 'initial.npz') as data:
        initial = data['initial']
    return DgSolution(partition=partition, basis=basis, space=space, slabs=tuple(slabs), initial=initial,
                      direction=manifest['direction'], label=manifest['label'])
