"""Wavelet-domain progressive image synthesis at desk scale.

Subpackages/modules:

* ``tensor``    reverse-mode autodiff core (conv, resize, Haar primitives)
* ``optim``     Adam with bias correction
* ``wavelet``   orthonormal Haar analysis/synthesis and resampling operators
* ``spectral``  FFT, radial power spectra, spectrum-gap metric, blur baselines
* ``nn``        generator/discriminator builders and forward passes
* ``train``     losses, training loops, projection, throughput bench
* ``data_io``   PNG codec, synthetic datasets, checkpoint container, dumps
* ``cli``       the ``swagan`` command
"""

__version__ = "0.1.0"
