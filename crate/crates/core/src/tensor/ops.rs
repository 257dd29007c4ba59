//! Raw numeric kernels shared by the tape's forward and backward passes.

/// C (m×n) += op(A)·op(B) where op transposes when the flag is set.
/// `a` stores m×k (or k×m when `ta`), `b` stores k×n (or n×k when `tb`).
pub(crate) fn gemm_acc(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    ta: bool,
    b: &[f64],
    tb: bool,
    out: &mut [f64],
) {
    debug_assert_eq!(out.len(), m * n);
    // matvec fast paths: the length-1 inner loops of the general cases cost
    // more than the arithmetic
    if n == 1 {
        match (ta, tb) {
            (false, _) => {
                // out[i] += dot(A row i, b)
                for (i, o) in out.iter_mut().enumerate() {
                    let arow = &a[i * k..(i + 1) * k];
                    let mut acc = 0.0;
                    for (&av, &bv) in arow.iter().zip(b) {
                        acc += av * bv;
                    }
                    *o += acc;
                }
            }
            (true, _) => {
                // A stored k×m: out[i] += Σ_p A[p,i]·b[p]  (axpy per row p)
                for p in 0..k {
                    let bp = b[p];
                    if bp == 0.0 {
                        continue;
                    }
                    let arow = &a[p * m..(p + 1) * m];
                    for (o, &av) in out.iter_mut().zip(arow) {
                        *o += av * bp;
                    }
                }
            }
        }
        return;
    }
    // k == 1 is an outer product; storage layouts coincide for both
    // transpose flags of a vector
    if k == 1 {
        for (i, &av) in a.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let crow = &mut out[i * n..(i + 1) * n];
            for (c, &bv) in crow.iter_mut().zip(b) {
                *c += av * bv;
            }
        }
        return;
    }
    match (ta, tb) {
        (false, false) => {
            for i in 0..m {
                let arow = &a[i * k..(i + 1) * k];
                let crow = &mut out[i * n..(i + 1) * n];
                for (p, &ap) in arow.iter().enumerate() {
                    if ap == 0.0 {
                        continue;
                    }
                    let brow = &b[p * n..(p + 1) * n];
                    for (c, &bv) in crow.iter_mut().zip(brow) {
                        *c += ap * bv;
                    }
                }
            }
        }
        (false, true) => {
            // B stored n×k: C[i,j] = dot(A row i, B row j)
            for i in 0..m {
                let arow = &a[i * k..(i + 1) * k];
                let crow = &mut out[i * n..(i + 1) * n];
                for (j, c) in crow.iter_mut().enumerate() {
                    let brow = &b[j * k..(j + 1) * k];
                    let mut acc = 0.0;
                    for (&av, &bv) in arow.iter().zip(brow) {
                        acc += av * bv;
                    }
                    *c += acc;
                }
            }
        }
        (true, false) => {
            // A stored k×m: C[i,j] += A[p,i]·B[p,j]
            for p in 0..k {
                let arow = &a[p * m..(p + 1) * m];
                let brow = &b[p * n..(p + 1) * n];
                for (i, &ap) in arow.iter().enumerate() {
                    if ap == 0.0 {
                        continue;
                    }
                    let crow = &mut out[i * n..(i + 1) * n];
                    for (c, &bv) in crow.iter_mut().zip(brow) {
                        *c += ap * bv;
                    }
                }
            }
        }
        (true, true) => {
            // A stored k×m, B stored n×k: C[i,j] += A[p,i]·B[j,p]
            for i in 0..m {
                for j in 0..n {
                    let brow = &b[j * k..(j + 1) * k];
                    let mut acc = 0.0;
                    for (p, &bv) in brow.iter().enumerate() {
                        acc += a[p * m + i] * bv;
                    }
                    out[i * n + j] += acc;
                }
            }
        }
    }
}

/// Output spatial dim for a conv: floor((in + 2·pad − kernel)/stride) + 1.
pub fn conv_out_dim(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    if padded < kernel || stride == 0 {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Output columns whose input column `ocol·stride + c − pad` lands in
/// `[0, input)`: the half-open range `lo..hi`.
#[inline]
fn valid_out_range(input: usize, c: usize, stride: usize, pad: usize, out: usize) -> (usize, usize) {
    let lo = if c >= pad {
        0
    } else {
        (pad - c).div_ceil(stride)
    };
    let max_in = input + pad;
    if max_in <= c {
        return (0, 0);
    }
    let hi = ((max_in - 1 - c) / stride + 1).min(out);
    (lo.min(hi), hi)
}

/// Forward conv2d with zero padding. x: [cin,h,w], w: [cout,cin,kh,kw],
/// out: [cout,oh,ow] (pre-zeroed).
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv2d_forward(
    x: &[f64],
    w: &[f64],
    cin: usize,
    h: usize,
    wd: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    out: &mut [f64],
) {
    for co in 0..cout {
        let wbase = co * cin * kh * kw;
        let obase = co * oh * ow;
        for ci in 0..cin {
            let xbase = ci * h * wd;
            let kbase = wbase + ci * kh * kw;
            for r in 0..kh {
                let (rlo, rhi) = valid_out_range(h, r, stride, pad, oh);
                let krow = &w[kbase + r * kw..kbase + (r + 1) * kw];
                for orow in rlo..rhi {
                    let ih = orow * stride + r - pad;
                    let xrow = &x[xbase + ih * wd..xbase + (ih + 1) * wd];
                    let orow_s = &mut out[obase + orow * ow..obase + (orow + 1) * ow];
                    for (c, &kv) in krow.iter().enumerate() {
                        if kv == 0.0 {
                            continue;
                        }
                        let (clo, chi) = valid_out_range(wd, c, stride, pad, ow);
                        if stride == 1 {
                            let off = clo + c - pad;
                            for (o, &xv) in orow_s[clo..chi]
                                .iter_mut()
                                .zip(&xrow[off..off + (chi - clo)])
                            {
                                *o += kv * xv;
                            }
                        } else {
                            for (ocol, o) in orow_s[clo..chi].iter_mut().enumerate() {
                                let iw = (ocol + clo) * stride + c - pad;
                                *o += kv * xrow[iw];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Backward conv2d: accumulates input and weight gradients.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv2d_backward(
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    cin: usize,
    h: usize,
    wd: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    mut dx: Option<&mut [f64]>,
    mut dw: Option<&mut [f64]>,
) {
    for co in 0..cout {
        let wbase = co * cin * kh * kw;
        let obase = co * oh * ow;
        for ci in 0..cin {
            let xbase = ci * h * wd;
            let kbase = wbase + ci * kh * kw;
            for r in 0..kh {
                let (rlo, rhi) = valid_out_range(h, r, stride, pad, oh);
                for orow in rlo..rhi {
                    let ih = orow * stride + r - pad;
                    let xrow = &x[xbase + ih * wd..xbase + (ih + 1) * wd];
                    let grow = &dy[obase + orow * ow..obase + (orow + 1) * ow];
                    for c in 0..kw {
                        let (clo, chi) = valid_out_range(wd, c, stride, pad, ow);
                        if clo >= chi {
                            continue;
                        }
                        if let Some(dxb) = dx.as_deref_mut() {
                            let kv = w[kbase + r * kw + c];
                            if kv != 0.0 {
                                let dxrow = &mut dxb[xbase + ih * wd..xbase + (ih + 1) * wd];
                                if stride == 1 {
                                    let off = clo + c - pad;
                                    for (d, &g) in dxrow[off..off + (chi - clo)]
                                        .iter_mut()
                                        .zip(&grow[clo..chi])
                                    {
                                        *d += kv * g;
                                    }
                                } else {
                                    for (ocol, &g) in grow[clo..chi].iter().enumerate() {
                                        let iw = (ocol + clo) * stride + c - pad;
                                        dxrow[iw] += kv * g;
                                    }
                                }
                            }
                        }
                        if let Some(dwb) = dw.as_deref_mut() {
                            let mut acc = 0.0;
                            if stride == 1 {
                                let off = clo + c - pad;
                                for (&xv, &g) in
                                    xrow[off..off + (chi - clo)].iter().zip(&grow[clo..chi])
                                {
                                    acc += xv * g;
                                }
                            } else {
                                for (ocol, &g) in grow[clo..chi].iter().enumerate() {
                                    let iw = (ocol + clo) * stride + c - pad;
                                    acc += xrow[iw] * g;
                                }
                            }
                            dwb[kbase + r * kw + c] += acc;
                        }
                    }
                }
            }
        }
    }
}

/// Nearest-neighbour upsample by an integer factor. x: [c,h,w] → out: [c,fh,fw].
pub(crate) fn upsample_forward(
    x: &[f64],
    c: usize,
    h: usize,
    w: usize,
    f: usize,
    out: &mut [f64],
) {
    let (oh, ow) = (h * f, w * f);
    for ch in 0..c {
        for i in 0..oh {
            let src_row = &x[ch * h * w + (i / f) * w..ch * h * w + (i / f + 1) * w];
            let dst = &mut out[ch * oh * ow + i * ow..ch * oh * ow + (i + 1) * ow];
            for (j, d) in dst.iter_mut().enumerate() {
                *d = src_row[j / f];
            }
        }
    }
}

/// Backward of nearest-neighbour upsample: sums each f×f block of dy.
pub(crate) fn upsample_backward(
    dy: &[f64],
    c: usize,
    h: usize,
    w: usize,
    f: usize,
    dx: &mut [f64],
) {
    let (oh, ow) = (h * f, w * f);
    for ch in 0..c {
        for i in 0..oh {
            let grow = &dy[ch * oh * ow + i * ow..ch * oh * ow + (i + 1) * ow];
            let drow = &mut dx[ch * h * w + (i / f) * w..ch * h * w + (i / f + 1) * w];
            for (j, &g) in grow.iter().enumerate() {
                drow[j / f] += g;
            }
        }
    }
}
