//! Row-major dense kernels shared by the forward ops and their adjoints.
//!
//! Loop orders keep the innermost loop contiguous in memory for every
//! operand, and every output element is reduced in a fixed order, so results
//! are bit-reproducible.

/// `out[m×n] += a[m×k] · b[k×n]`
pub(crate) fn matmul_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &a_ip) in a_row.iter().enumerate() {
            if a_ip == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += a_ip * bv;
            }
        }
    }
}

/// `out[m×k] += g[m×n] · b[k×n]ᵀ`
pub(crate) fn matmul_nt_acc(g: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(g.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * k);
    for i in 0..m {
        let g_row = &g[i * n..(i + 1) * n];
        let out_row = &mut out[i * k..(i + 1) * k];
        for (p, o) in out_row.iter_mut().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            *o += dot(g_row, b_row);
        }
    }
}

/// `out[k×n] += a[m×k]ᵀ · g[m×n]`
pub(crate) fn matmul_tn_acc(a: &[f64], g: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(g.len(), m * n);
    debug_assert_eq!(out.len(), k * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let g_row = &g[i * n..(i + 1) * n];
        for (p, &a_ip) in a_row.iter().enumerate() {
            if a_ip == 0.0 {
                continue;
            }
            let out_row = &mut out[p * n..(p + 1) * n];
            for (o, &gv) in out_row.iter_mut().zip(g_row) {
                *o += a_ip * gv;
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four independent accumulators so the loop vectorises
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Row-major strides for a shape.
pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Copies `src` (with `shape`) into a new buffer laid out as the axes
/// permuted by `perm`: output axis `i` is input axis `perm[i]`.
pub(crate) fn permute(src: &[f64], shape: &[usize], perm: &[usize]) -> Vec<f64> {
    let rank = shape.len();
    let in_strides = strides(shape);
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let mapped: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let mut out = Vec::with_capacity(src.len());
    let mut idx = vec![0usize; rank];
    let mut offset = 0usize;
    for _ in 0..src.len() {
        out.push(src[offset]);
        // odometer increment over the output index
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            offset += mapped[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            offset -= mapped[ax] * out_shape[ax];
            idx[ax] = 0;
        }
    }
    out
}

pub(crate) fn inverse_perm(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permute_transposes_matrix() {
        let src: Vec<f64> = (0..6).map(f64::from).collect();
        let out = permute(&src, &[2, 3], &[1, 0]);
        assert_eq!(out, vec![0.0, 3.0, 1.0, 4.0, 2.0, 5.0]);
    }

    #[test]
    fn permute_round_trips_through_inverse() {
        let shape = [2, 3, 4, 5];
        let src: Vec<f64> = (0..120).map(f64::from).collect();
        let perm = [0, 2, 1, 3];
        let out = permute(&src, &shape, &perm);
        let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
        let back = permute(&out, &out_shape, &inverse_perm(&perm));
        assert_eq!(back, src);
        // element [1,2,3,4] of src lands at [1,3,2,4]
        let s = strides(&shape);
        let o = strides(&out_shape);
        assert_eq!(out[o[0] + 3 * o[1] + 2 * o[2] + 4], src[s[0] + 2 * s[1] + 3 * s[2] + 4]);
    }

    #[test]
    fn transposed_products_agree_with_plain_product() {
        let (m, k, n) = (3, 4, 2);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.91).cos()).collect();
        let mut c = vec![0.0; m * n];
        matmul_acc(&a, &b, &mut c, m, k, n);
        for i in 0..m {
            for j in 0..n {
                let want: f64 = (0..k).map(|p| a[i * k + p] * b[p * n + j]).sum();
                assert!((c[i * n + j] - want).abs() < 1e-14);
            }
        }
        // gᵀ-style products checked against explicit transposes
        let g: Vec<f64> = (0..m * n).map(|i| i as f64 - 2.5).collect();
        let mut da = vec![0.0; m * k];
        matmul_nt_acc(&g, &b, &mut da, m, k, n);
        let bt = permute(&b, &[k, n], &[1, 0]);
        let mut da_ref = vec![0.0; m * k];
        matmul_acc(&g, &bt, &mut da_ref, m, n, k);
        for (x, y) in da.iter().zip(&da_ref) {
            assert!((x - y).abs() < 1e-12);
        }
        let mut db = vec![0.0; k * n];
        matmul_tn_acc(&a, &g, &mut db, m, k, n);
        let at = permute(&a, &[m, k], &[1, 0]);
        let mut db_ref = vec![0.0; k * n];
        matmul_acc(&at, &g, &mut db_ref, k, m, n);
        for (x, y) in db.iter().zip(&db_ref) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
