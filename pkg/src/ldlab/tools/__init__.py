"""Tools for the ldlab MCP server."""

from .certificates import get_certificate, batch_certificates
from .competitor import get_lattice_competitor
from .bc_energies import get_bc_energies
from .moment_kill import run_moment_kill

__all__ = [
    'get_certificate',
    'batch_certificates',
    'get_lattice_competitor',
    'get_bc_energies',
    'run_moment_kill',
]
