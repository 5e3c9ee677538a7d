use super::{ProbeError, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(ProbeError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    cos64(&to_f64(a), &to_f64(b))
}

fn cos64(a: &[f64], b: &[f64]) -> Result<f64> {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(ProbeError::ZeroNorm);
    }
    Ok(dot(a, b) / (na * nb))
}

/// `1 - cos(a, b)`, in `[0, 2]`.
pub fn cosine_distance(a: &[f32], b: &[f32]) -> Result<f64> {
    Ok(1.0 - cosine_similarity(a, b)?)
}

/// `max(0, m + d(a, p) - d(a, n))` with `d` the cosine distance.
pub fn hinge_loss(anchor: &[f32], positive: &[f32], negative: &[f32], margin: f64) -> Result<f64> {
    let dp = cosine_distance(anchor, positive)?;
    let dn = cosine_distance(anchor, negative)?;
    Ok((margin + dp - dn).max(0.0))
}

/// Scratch space for per-triple forward/backward passes.
#[derive(Clone, Debug)]
pub(crate) struct Scratch {
    za: Vec<f64>,
    zp: Vec<f64>,
    zn: Vec<f64>,
    ga: Vec<f64>,
    gp: Vec<f64>,
    gn: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(d_out: usize) -> Self {
        let z = vec![0.0; d_out];
        Scratch {
            za: z.clone(),
            zp: z.clone(),
            zn: z.clone(),
            ga: z.clone(),
            gp: z.clone(),
            gn: z,
        }
    }
}

pub(crate) fn project64(w: &[f64], d_in: usize, x: &[f32], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(w.chunks_exact(d_in)) {
        *o = row.iter().zip(x).map(|(&a, &b)| a * b as f64).sum();
    }
}

/// d cos(u, v) / d u, accumulated into `g` with weight `s`.
fn dcos_du(u: &[f64], v: &[f64], nu: f64, nv: f64, c: f64, s: f64, g: &mut [f64]) {
    let inv = 1.0 / (nu * nv);
    let k = c / (nu * nu);
    for i in 0..u.len() {
        g[i] += s * (v[i] * inv - k * u[i]);
    }
}

/// Loss of one triple; when `grad` is given and the hinge is active, adds
/// `scale * dL/dW` into it (row-major `d_out × d_in`).
pub(crate) fn triplet_forward_backward(
    w: &[f64],
    d_in: usize,
    xa: &[f32],
    xp: &[f32],
    xn: &[f32],
    margin: f64,
    scratch: &mut Scratch,
    grad: Option<(&mut [f64], f64)>,
) -> Result<f64> {
    let Scratch { za, zp, zn, ga, gp, gn } = scratch;
    project64(w, d_in, xa, za);
    project64(w, d_in, xp, zp);
    project64(w, d_in, xn, zn);
    let (na, np, nn) = (dot(za, za).sqrt(), dot(zp, zp).sqrt(), dot(zn, zn).sqrt());
    if na == 0.0 || np == 0.0 || nn == 0.0 {
        return Err(ProbeError::ZeroNorm);
    }
    let cap = dot(za, zp) / (na * np);
    let can = dot(za, zn) / (na * nn);
    // d(a,p) - d(a,n) = cos(a,n) - cos(a,p)
    let raw = margin - cap + can;
    if raw <= 0.0 {
        return Ok(0.0);
    }
    if let Some((g, scale)) = grad {
        ga.iter_mut().chain(gp.iter_mut()).chain(gn.iter_mut()).for_each(|v| *v = 0.0);
        dcos_du(za, zp, na, np, cap, -1.0, ga);
        dcos_du(za, zn, na, nn, can, 1.0, ga);
        dcos_du(zp, za, np, na, cap, -1.0, gp);
        dcos_du(zn, za, nn, na, can, 1.0, gn);
        for (r, grow) in g.chunks_exact_mut(d_in).enumerate() {
            let (a, p, n) = (ga[r] * scale, gp[r] * scale, gn[r] * scale);
            for c in 0..d_in {
                grow[c] += a * xa[c] as f64 + p * xp[c] as f64 + n * xn[c] as f64;
            }
        }
    }
    Ok(raw)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TripletGrad {
    pub loss: f64,
    /// dL/dW, row-major `d_out × d_in`; exactly zero when the hinge is inactive.
    pub grad: Vec<f64>,
}

/// Loss and analytic gradient of one triple with respect to the weights.
pub fn hinge_loss_grad(
    weights: &[f64],
    d_out: usize,
    d_in: usize,
    anchor: &[f32],
    positive: &[f32],
    negative: &[f32],
    margin: f64,
) -> Result<TripletGrad> {
    if weights.len() != d_out * d_in {
        return Err(ProbeError::DimensionMismatch {
            expected: d_out * d_in,
            got: weights.len(),
        });
    }
    for x in [anchor, positive, negative] {
        if x.len() != d_in {
            return Err(ProbeError::DimensionMismatch {
                expected: d_in,
                got: x.len(),
            });
        }
    }
    let mut scratch = Scratch::new(d_out);
    let mut grad = vec![0.0; d_out * d_in];
    let loss = triplet_forward_backward(
        weights,
        d_in,
        anchor,
        positive,
        negative,
        margin,
        &mut scratch,
        Some((&mut grad, 1.0)),
    )?;
    Ok(TripletGrad { loss, grad })
}
