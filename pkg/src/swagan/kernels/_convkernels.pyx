# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled 2-D cross-correlation kernels (forward, input grad, weight grad).

Hot inner loops live in verbatim C with restrict-qualified pointers so the
compiler can vectorize the unit-stride spans; the row loop is fused into the
C helpers so each kernel tap costs one call per image plane.  Accumulation
order is fixed, so results are bitwise reproducible run to run.
"""

import numpy as np

cimport cython

cdef extern from *:
    """
    /* y[r, 0:n] += w * x[r, 0:n*xstep:xstep] over `rows` rows. */
    #define AXPY2D(NAME, T)                                                   \
    static void NAME(T* __restrict y, const T* __restrict x, T w,             \
                     long rows, long n, long yrow, long xrow, long xstep) {   \
        for (long r = 0; r < rows; ++r) {                                     \
            T* __restrict yp = y + r * yrow;                                  \
            const T* __restrict xp = x + r * xrow;                            \
            if (xstep == 1) {                                                 \
                for (long i = 0; i < n; ++i) yp[i] += w * xp[i];              \
            } else {                                                          \
                for (long i = 0; i < n; ++i) yp[i] += w * xp[i * xstep];      \
            }                                                                 \
        }                                                                     \
    }
    AXPY2D(axpy2d_f, float)
    AXPY2D(axpy2d_d, double)

    /* scatter form: y[r, 0:n*ystep:ystep] += w * x[r, 0:n]. */
    #define AXPY2DS(NAME, T)                                                  \
    static void NAME(T* __restrict y, const T* __restrict x, T w,             \
                     long rows, long n, long yrow, long xrow, long ystep) {   \
        for (long r = 0; r < rows; ++r) {                                     \
            T* __restrict yp = y + r * yrow;                                  \
            const T* __restrict xp = x + r * xrow;                            \
            if (ystep == 1) {                                                 \
                for (long i = 0; i < n; ++i) yp[i] += w * xp[i];              \
            } else {                                                          \
                for (long i = 0; i < n; ++i) yp[i * ystep] += w * xp[i];      \
            }                                                                 \
        }                                                                     \
    }
    AXPY2DS(axpy2ds_f, float)
    AXPY2DS(axpy2ds_d, double)

    /* sum over rows of dot(a[r, 0:n*astep:astep], b[r, 0:n]); four-way
       unrolled with a fixed association order (deterministic). */
    #define DOT2D(NAME, T)                                                    \
    static T NAME(const T* __restrict a, const T* __restrict b,               \
                  long rows, long n, long arow, long brow, long astep) {      \
        T total = 0;                                                          \
        for (long r = 0; r < rows; ++r) {                                     \
            const T* __restrict ap = a + r * arow;                            \
            const T* __restrict bp = b + r * brow;                            \
            T s0 = 0, s1 = 0, s2 = 0, s3 = 0;                                 \
            long i = 0;                                                       \
            if (astep == 1) {                                                 \
                for (; i + 4 <= n; i += 4) {                                  \
                    s0 += ap[i] * bp[i];     s1 += ap[i+1] * bp[i+1];         \
                    s2 += ap[i+2] * bp[i+2]; s3 += ap[i+3] * bp[i+3];         \
                }                                                             \
                for (; i < n; ++i) s0 += ap[i] * bp[i];                       \
            } else {                                                          \
                for (; i < n; ++i) s0 += ap[i * astep] * bp[i];               \
            }                                                                 \
            total += (s0 + s1) + (s2 + s3);                                   \
        }                                                                     \
        return total;                                                         \
    }
    DOT2D(dot2d_f, float)
    DOT2D(dot2d_d, double)
    """
    void axpy2d_f(float* y, const float* x, float w, long rows, long n,
                  long yrow, long xrow, long xstep) nogil
    void axpy2d_d(double* y, const double* x, double w, long rows, long n,
                  long yrow, long xrow, long xstep) nogil
    void axpy2ds_f(float* y, const float* x, float w, long rows, long n,
                   long yrow, long xrow, long ystep) nogil
    void axpy2ds_d(double* y, const double* x, double w, long rows, long n,
                   long yrow, long xrow, long ystep) nogil
    float dot2d_f(const float* a, const float* b, long rows, long n,
                  long arow, long brow, long astep) nogil
    double dot2d_d(const double* a, const double* b, long rows, long n,
                   long arow, long brow, long astep) nogil

ctypedef fused real:
    float
    double


cdef inline void _axpy2d(real* y, const real* x, real w, long rows, long n,
                         long yrow, long xrow, long xstep) noexcept nogil:
    if real is float:
        axpy2d_f(<float*> y, <const float*> x, w, rows, n, yrow, xrow, xstep)
    else:
        axpy2d_d(<double*> y, <const double*> x, w, rows, n, yrow, xrow, xstep)


cdef inline void _axpy2ds(real* y, const real* x, real w, long rows, long n,
                          long yrow, long xrow, long ystep) noexcept nogil:
    if real is float:
        axpy2ds_f(<float*> y, <const float*> x, w, rows, n, yrow, xrow, ystep)
    else:
        axpy2ds_d(<double*> y, <const double*> x, w, rows, n, yrow, xrow, ystep)


cdef inline real _dot2d(const real* a, const real* b, long rows, long n,
                        long arow, long brow, long astep) noexcept nogil:
    if real is float:
        return dot2d_f(<const float*> a, <const float*> b, rows, n, arow, brow,
                       astep)
    else:
        return dot2d_d(<const double*> a, <const double*> b, rows, n, arow,
                       brow, astep)


cdef struct TapSpan:
    # valid output window [oy_lo, oy_hi) x [ox_lo, ox_hi) for a kernel tap
    Py_ssize_t oy_lo, oy_hi, ox_lo, ox_hi


cdef inline TapSpan _span(Py_ssize_t ky, Py_ssize_t kx, Py_ssize_t H,
                          Py_ssize_t W, Py_ssize_t Ho, Py_ssize_t Wo,
                          int stride, int pad) noexcept nogil:
    cdef TapSpan s
    s.oy_lo = 0
    while s.oy_lo * stride - pad + ky < 0:
        s.oy_lo += 1
    s.oy_hi = Ho
    while s.oy_hi > s.oy_lo and (s.oy_hi - 1) * stride - pad + ky >= H:
        s.oy_hi -= 1
    s.ox_lo = 0
    while s.ox_lo * stride - pad + kx < 0:
        s.ox_lo += 1
    s.ox_hi = Wo
    while s.ox_hi > s.ox_lo and (s.ox_hi - 1) * stride - pad + kx >= W:
        s.ox_hi -= 1
    return s


cdef void _fwd(real[:, :, :, ::1] x, real[:, :, :, ::1] w, real[:, :, :, ::1] y,
               int stride, int pad) noexcept nogil:
    cdef Py_ssize_t N = x.shape[0], Cin = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t Cout = w.shape[0], k = w.shape[2]
    cdef Py_ssize_t Ho = y.shape[2], Wo = y.shape[3]
    cdef Py_ssize_t n, co, ci, ky, kx, iy0, ix0, rows, cols
    cdef TapSpan s
    for n in range(N):
        for co in range(Cout):
            for ci in range(Cin):
                for ky in range(k):
                    for kx in range(k):
                        s = _span(ky, kx, H, W, Ho, Wo, stride, pad)
                        rows = s.oy_hi - s.oy_lo
                        cols = s.ox_hi - s.ox_lo
                        if rows <= 0 or cols <= 0:
                            continue
                        iy0 = s.oy_lo * stride - pad + ky
                        ix0 = s.ox_lo * stride - pad + kx
                        _axpy2d(&y[n, co, s.oy_lo, s.ox_lo],
                                &x[n, ci, iy0, ix0],
                                w[co, ci, ky, kx], rows, cols,
                                Wo, W * stride, stride)


cdef void _grad_input(real[:, :, :, ::1] gy, real[:, :, :, ::1] w,
                      real[:, :, :, ::1] gx, int stride, int pad) noexcept nogil:
    cdef Py_ssize_t N = gy.shape[0], Cout = gy.shape[1]
    cdef Py_ssize_t Ho = gy.shape[2], Wo = gy.shape[3]
    cdef Py_ssize_t Cin = w.shape[1], k = w.shape[2]
    cdef Py_ssize_t H = gx.shape[2], W = gx.shape[3]
    cdef Py_ssize_t n, co, ci, ky, kx, iy0, ix0, rows, cols
    cdef TapSpan s
    for n in range(N):
        for ci in range(Cin):
            for co in range(Cout):
                for ky in range(k):
                    for kx in range(k):
                        s = _span(ky, kx, H, W, Ho, Wo, stride, pad)
                        rows = s.oy_hi - s.oy_lo
                        cols = s.ox_hi - s.ox_lo
                        if rows <= 0 or cols <= 0:
                            continue
                        iy0 = s.oy_lo * stride - pad + ky
                        ix0 = s.ox_lo * stride - pad + kx
                        _axpy2ds(&gx[n, ci, iy0, ix0],
                                 &gy[n, co, s.oy_lo, s.ox_lo],
                                 w[co, ci, ky, kx], rows, cols,
                                 W * stride, Wo, stride)


cdef void _grad_weight(real[:, :, :, ::1] x, real[:, :, :, ::1] gy,
                       real[:, :, :, ::1] gw, int stride, int pad) noexcept nogil:
    cdef Py_ssize_t N = x.shape[0], Cin = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t Cout = gy.shape[1], Ho = gy.shape[2], Wo = gy.shape[3]
    cdef Py_ssize_t k = gw.shape[2]
    cdef Py_ssize_t n, co, ci, ky, kx, iy0, ix0, rows, cols
    cdef TapSpan s
    cdef real acc
    for co in range(Cout):
        for ci in range(Cin):
            for ky in range(k):
                for kx in range(k):
                    s = _span(ky, kx, H, W, Ho, Wo, stride, pad)
                    rows = s.oy_hi - s.oy_lo
                    cols = s.ox_hi - s.ox_lo
                    acc = 0
                    if rows > 0 and cols > 0:
                        iy0 = s.oy_lo * stride - pad + ky
                        ix0 = s.ox_lo * stride - pad + kx
                        for n in range(N):
                            acc = acc + _dot2d(&x[n, ci, iy0, ix0],
                                               &gy[n, co, s.oy_lo, s.ox_lo],
                                               rows, cols, W * stride, Wo, stride)
                    gw[co, ci, ky, kx] = acc


def conv2d_forward(x, w, int stride, int pad):
    """Cross-correlate NCHW input with OIkk weights; zero padding.

    Releases the GIL, so callers may shard the batch axis across threads;
    per-sample outputs are disjoint and the result stays bitwise identical
    to a single-threaded run.
    """
    cdef Py_ssize_t Ho = (x.shape[2] + 2 * pad - w.shape[2]) // stride + 1
    cdef Py_ssize_t Wo = (x.shape[3] + 2 * pad - w.shape[3]) // stride + 1
    y = np.zeros((x.shape[0], w.shape[0], Ho, Wo), dtype=x.dtype)
    cdef float[:, :, :, ::1] xf, wf, yf
    cdef double[:, :, :, ::1] xd, wd, yd
    if x.dtype == np.float32:
        xf, wf, yf = x, w, y
        with nogil:
            _fwd[float](xf, wf, yf, stride, pad)
    else:
        xd, wd, yd = x, w, y
        with nogil:
            _fwd[double](xd, wd, yd, stride, pad)
    return y


def conv2d_grad_input(gy, w, int stride, int pad, Py_ssize_t H, Py_ssize_t W):
    """Adjoint of conv2d_forward with respect to the input."""
    gx = np.zeros((gy.shape[0], w.shape[1], H, W), dtype=gy.dtype)
    cdef float[:, :, :, ::1] gyf, wf, gxf
    cdef double[:, :, :, ::1] gyd, wd, gxd
    if gy.dtype == np.float32:
        gyf, wf, gxf = gy, w, gx
        with nogil:
            _grad_input[float](gyf, wf, gxf, stride, pad)
    else:
        gyd, wd, gxd = gy, w, gx
        with nogil:
            _grad_input[double](gyd, wd, gxd, stride, pad)
    return gx


def conv2d_grad_weight(x, gy, int stride, int pad, Py_ssize_t k):
    """Adjoint of conv2d_forward with respect to the weights."""
    gw = np.zeros((gy.shape[1], x.shape[1], k, k), dtype=x.dtype)
    cdef float[:, :, :, ::1] xf, gyf, gwf
    cdef double[:, :, :, ::1] xd, gyd, gwd
    if x.dtype == np.float32:
        xf, gyf, gwf = x, gy, gw
        with nogil:
            _grad_weight[float](xf, gyf, gwf, stride, pad)
    else:
        xd, gyd, gwd = x, gy, gw
        with nogil:
            _grad_weight[double](xd, gyd, gwd, stride, pad)
    return gw
