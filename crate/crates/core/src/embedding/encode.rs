use std::f64::consts::PI;

use crate::real::Real;

/// `[p, sin(2^0 pi p), cos(2^0 pi p), ..., sin(2^(L-1) pi p), cos(2^(L-1) pi p)]`
/// per scalar.
pub fn positional_encode(p: &[f64], frequencies: usize) -> Vec<f64> {
    let mut out = vec![0.0; p.len() * (1 + 2 * frequencies)];
    encode_into(p, frequencies, &mut out);
    out
}

/// [`positional_encode`] into a preallocated slice of any precision.
///
/// Higher octaves come from the double-angle identities, which cost a few
/// multiplications instead of a trigonometric call and lose well under a
/// part in 1e12 over ten octaves.
pub fn encode_into<T: Real>(p: &[f64], frequencies: usize, out: &mut [T]) {
    let per = 1 + 2 * frequencies;
    assert_eq!(out.len(), p.len() * per);
    for (&v, chunk) in p.iter().zip(out.chunks_exact_mut(per)) {
        chunk[0] = T::of(v);
        if frequencies == 0 {
            continue;
        }
        let (mut s, mut c) = (PI * v).sin_cos();
        for i in 0..frequencies {
            chunk[1 + 2 * i] = T::of(s);
            chunk[2 + 2 * i] = T::of(c);
            let (s2, c2) = (2.0 * s * c, (c - s) * (c + s));
            s = s2;
            c = c2;
        }
    }
}

/// Back-propagates through [`encode_into`]: `encoded` is the forward output,
/// `grad` the gradient with respect to it. Writes one value per raw scalar.
pub fn encode_backward<T: Real>(encoded: &[T], grad: &[T], frequencies: usize, out: &mut [f64]) {
    let per = 1 + 2 * frequencies;
    assert_eq!(encoded.len(), out.len() * per);
    assert_eq!(grad.len(), encoded.len());
    for (i, o) in out.iter_mut().enumerate() {
        let e = &encoded[i * per..(i + 1) * per];
        let g = &grad[i * per..(i + 1) * per];
        let mut acc = g[0].f64();
        let mut scale = PI;
        for f in 0..frequencies {
            let (s, c) = (e[1 + 2 * f].f64(), e[2 + 2 * f].f64());
            acc += scale * (g[1 + 2 * f].f64() * c - g[2 + 2 * f].f64() * s);
            scale *= 2.0;
        }
        *o = acc;
    }
}
