"""2-D discrete Fourier transform utilities and amplitude/phase algebra.

All transforms here are unitary: the forward and inverse both carry a
1/sqrt(H*W) factor, so Parseval's identity holds symmetrically and a
forward/inverse round trip is the identity. Transforms act on the last two
axes; every leading axis (channel, batch) is handled independently. No
frequency-centering reorder is applied anywhere in the package -- all
amplitude/phase arithmetic is elementwise, so bin ordering only needs to be
consistent.
"""

from __future__ import annotations

import torch

from .errors import ConjugateSymmetryError, InvalidInputError

__all__ = [
    "forward_transform",
    "inverse_transform",
    "to_amplitude_phase",
    "from_amplitude_phase",
    "recombine_image",
]


def forward_transform(img: torch.Tensor) -> torch.Tensor:
    """Unitary per-channel 2-D DFT of a real image or feature tensor.

    Args:
        img: real tensor of shape (..., H, W) with finite values.

    Returns:
        Complex tensor of the same shape.
    """
    if img.is_complex():
        raise InvalidInputError("forward_transform expects a real tensor")
    if not torch.isfinite(img).all():
        raise InvalidInputError("forward_transform input contains non-finite values")
    return torch.fft.fft2(img, norm="ortho")


def inverse_transform(spec: torch.Tensor, residue_tol: float = 1e-4) -> torch.Tensor:
    """Unitary inverse 2-D DFT, returning the real part.

    The imaginary residue of the inverse is discarded when it is negligible.
    A residue larger than `residue_tol` times the signal norm means the
    spectrum was not conjugate-symmetric (i.e. it does not come from a real
    image) and is treated as an error. Callers that modify amplitude bins
    individually and *expect* a residue should use `recombine_image` instead.
    """
    if not spec.is_complex():
        raise InvalidInputError("inverse_transform expects a complex tensor")
    out = torch.fft.ifft2(spec, norm="ortho")
    signal_norm = torch.linalg.vector_norm(out.real)
    residue_norm = torch.linalg.vector_norm(out.imag)
    if residue_norm > residue_tol * torch.clamp(signal_norm, min=1e-12):
        raise ConjugateSymmetryError(
            "inverse transform has imaginary residue "
            f"{residue_norm.item():.3e} vs signal norm {signal_norm.item():.3e}; "
            "the spectrum is not conjugate-symmetric"
        )
    return out.real


def to_amplitude_phase(spec: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Split a complex spectrum into (amplitude, phase).

    Amplitude is the elementwise magnitude sqrt(R^2 + I^2). Phase is the
    four-quadrant angle atan2(I, R) in (-pi, pi]; a single-argument arctan
    would lose the half-plane sign and break exact recombination. Bins with
    R = I = 0 get phase 0 by convention.
    """
    if not spec.is_complex():
        raise InvalidInputError("to_amplitude_phase expects a complex tensor")
    return torch.abs(spec), torch.angle(spec)


def from_amplitude_phase(amplitude: torch.Tensor, phase: torch.Tensor) -> torch.Tensor:
    """Rebuild a complex spectrum from amplitude and phase.

    R = amplitude * cos(phase), I = amplitude * sin(phase). Exact inverse of
    `to_amplitude_phase` up to floating-point rounding.
    """
    if amplitude.shape != phase.shape:
        raise InvalidInputError(
            f"amplitude shape {tuple(amplitude.shape)} != phase shape {tuple(phase.shape)}"
        )
    if (amplitude < 0).any():
        raise InvalidInputError("amplitude must be elementwise non-negative")
    return torch.complex(amplitude * torch.cos(phase), amplitude * torch.sin(phase))


def recombine_image(amplitude: torch.Tensor, phase: torch.Tensor) -> torch.Tensor:
    """Inverse-transform an (amplitude, phase) pair straight to a real tensor.

    Unlike `inverse_transform` this never raises on imaginary residue: per-bin
    amplitude edits (transform-map division, learned frequency filters)
    legitimately break conjugate symmetry, and the residue is discarded by
    construction. Differentiable; used on the network forward path.
    """
    real = amplitude * torch.cos(phase)
    imag = amplitude * torch.sin(phase)
    return torch.fft.ifft2(torch.complex(real, imag), norm="ortho").real
