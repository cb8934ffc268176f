//! Truncated Taylor jets in `(x, y, t)`.

use std::ops::{Add, Mul, Sub};

/// Component slots of a jet, in propagation order. Every component only
/// depends on components at or before it, so a jet can be truncated after
/// [`JetOrder::ncomp`] slots.
pub(crate) const V: usize = 0;
pub(crate) const X: usize = 1;
pub(crate) const Y: usize = 2;
pub(crate) const T: usize = 3;
pub(crate) const XX: usize = 4;
pub(crate) const YY: usize = 5;
pub(crate) const XY: usize = 6;
pub(crate) const XT: usize = 7;
pub(crate) const YT: usize = 8;
pub(crate) const XXT: usize = 9;
pub(crate) const YYT: usize = 10;
pub(crate) const XYT: usize = 11;
pub(crate) const NCOMP: usize = 12;

/// How many derivative components to carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum JetOrder {
    /// Value only.
    Value,
    /// Value, `∂x`, `∂y`, `∂t`.
    First,
    /// Adds `∂xx`, `∂yy`, `∂xy`, `∂xt`, `∂yt`.
    Second,
    /// Adds `∂xxt`, `∂yyt`, `∂xyt` (time derivatives of the boundary
    /// derivatives of the Robin residual).
    Third,
}

impl JetOrder {
    pub fn ncomp(self) -> usize {
        match self {
            JetOrder::Value => 1,
            JetOrder::First => 4,
            JetOrder::Second => 9,
            JetOrder::Third => NCOMP,
        }
    }
}

/// Value and partial derivatives of a scalar function of `(x, y, t)` at one
/// point. Components beyond the evaluated [`JetOrder`] are zero.
///
/// The same struct doubles as the adjoint seed for reverse accumulation:
/// each field then holds `∂loss/∂(component)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub v: f64,
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
    pub xt: f64,
    pub yt: f64,
    pub xxt: f64,
    pub yyt: f64,
    pub xyt: f64,
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Self {
            v,
            ..Self::default()
        }
    }

    pub fn to_array(self) -> [f64; NCOMP] {
        [
            self.v, self.x, self.y, self.t, self.xx, self.yy, self.xy, self.xt, self.yt,
            self.xxt, self.yyt, self.xyt,
        ]
    }

    pub fn from_array(a: [f64; NCOMP]) -> Self {
        Self {
            v: a[V],
            x: a[X],
            y: a[Y],
            t: a[T],
            xx: a[XX],
            yy: a[YY],
            xy: a[XY],
            xt: a[XT],
            yt: a[YT],
            xxt: a[XXT],
            yyt: a[YYT],
            xyt: a[XYT],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn laplacian(&self) -> f64 {
        self.xx + self.yy
    }

    /// `n·∇u` for an axis-aligned normal.
    pub fn dn(&self, n: [f64; 2]) -> f64 {
        n[0] * self.x + n[1] * self.y
    }

    /// `aᵀ H b`.
    pub fn hess(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        a[0] * b[0] * self.xx + a[1] * b[1] * self.yy + (a[0] * b[1] + a[1] * b[0]) * self.xy
    }

    pub fn dnt(&self, n: [f64; 2]) -> f64 {
        n[0] * self.xt + n[1] * self.yt
    }

    /// `∂t (aᵀ H b)`.
    pub fn hess_t(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        a[0] * b[0] * self.xxt + a[1] * b[1] * self.yyt + (a[0] * b[1] + a[1] * b[0]) * self.xyt
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let (a, b) = (self.to_array(), o.to_array());
        Jet::from_array(std::array::from_fn(|i| a[i] + b[i]))
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        let (a, b) = (self.to_array(), o.to_array());
        Jet::from_array(std::array::from_fn(|i| a[i] - b[i]))
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let b = o.to_array();
        Jet::from_array(std::array::from_fn(|i| self * b[i]))
    }
}

/// tanh and its first four derivatives at `a`.
#[inline]
pub(crate) fn tanh_derivs(a: f64) -> [f64; 5] {
    // exp-based tanh is several times cheaper than libm's and exact to
    // within a few ulps of 1
    let s = 1.0 - 2.0 / ((2.0 * a).exp() + 1.0);
    let s1 = 1.0 - s * s;
    let s2 = -2.0 * s * s1;
    let s3 = -2.0 * s1 * s1 - 2.0 * s * s2;
    let s4 = -4.0 * s1 * s2 - 2.0 * s1 * s2 - 2.0 * s * s3;
    [s, s1, s2, s3, s4]
}

/// Pushes a pre-activation jet through tanh for one neuron.
///
/// `a` and `out` hold the components of a single neuron, `nc` of them.
#[inline]
pub(crate) fn activate(a: &[f64; NCOMP], nc: usize, out: &mut [f64; NCOMP]) {
    let [s, s1, s2, s3, _] = tanh_derivs(a[V]);
    out[V] = s;
    if nc > 1 {
        out[X] = s1 * a[X];
        out[Y] = s1 * a[Y];
        out[T] = s1 * a[T];
    }
    if nc > 4 {
        out[XX] = s2 * a[X] * a[X] + s1 * a[XX];
        out[YY] = s2 * a[Y] * a[Y] + s1 * a[YY];
        out[XY] = s2 * a[X] * a[Y] + s1 * a[XY];
        out[XT] = s2 * a[X] * a[T] + s1 * a[XT];
        out[YT] = s2 * a[Y] * a[T] + s1 * a[YT];
    }
    if nc > 9 {
        out[XYT] = s3 * a[X] * a[Y] * a[T]
            + s2 * (a[XT] * a[Y] + a[X] * a[YT] + a[XY] * a[T])
            + s1 * a[XYT];
        out[XXT] = s3 * a[X] * a[X] * a[T]
            + s2 * (2.0 * a[X] * a[XT] + a[XX] * a[T])
            + s1 * a[XXT];
        out[YYT] = s3 * a[Y] * a[Y] * a[T]
            + s2 * (2.0 * a[Y] * a[YT] + a[YY] * a[T])
            + s1 * a[YYT];
    }
}

/// Reverse of [`activate`]: maps output adjoints `g` to pre-activation
/// adjoints for one neuron.
#[inline]
pub(crate) fn activate_adjoint(a: &[f64; NCOMP], g: &[f64; NCOMP], nc: usize) -> [f64; NCOMP] {
    let [_, s1, s2, s3, s4] = tanh_derivs(a[V]);
    let mut r = [0.0; NCOMP];
    r[V] = s1 * g[V];
    if nc > 1 {
        r[V] += s2 * (g[X] * a[X] + g[Y] * a[Y] + g[T] * a[T]);
        r[X] = s1 * g[X];
        r[Y] = s1 * g[Y];
        r[T] = s1 * g[T];
    }
    if nc > 4 {
        r[V] += s3
            * (g[XX] * a[X] * a[X] + g[YY] * a[Y] * a[Y] + g[XT] * a[X] * a[T] + g[YT] * a[Y] * a[T])
            + s2 * (g[XX] * a[XX] + g[YY] * a[YY] + g[XT] * a[XT] + g[YT] * a[YT]);
        r[X] += 2.0 * s2 * a[X] * g[XX] + s2 * a[T] * g[XT];
        r[Y] += 2.0 * s2 * a[Y] * g[YY] + s2 * a[T] * g[YT];
        r[T] += s2 * (a[X] * g[XT] + a[Y] * g[YT]);
        r[XX] = s1 * g[XX];
        r[YY] = s1 * g[YY];
        r[XT] = s1 * g[XT];
        r[YT] = s1 * g[YT];
        let gm = g[XY];
        r[V] += gm * (s3 * a[X] * a[Y] + s2 * a[XY]);
        r[X] += gm * s2 * a[Y];
        r[Y] += gm * s2 * a[X];
        r[XY] = gm * s1;
    }
    if nc > 9 {
        let gg = g[XYT];
        if gg != 0.0 {
            r[V] += gg
                * (s4 * a[X] * a[Y] * a[T]
                    + s3 * (a[XT] * a[Y] + a[X] * a[YT] + a[XY] * a[T])
                    + s2 * a[XYT]);
            r[X] += gg * (s3 * a[Y] * a[T] + s2 * a[YT]);
            r[Y] += gg * (s3 * a[X] * a[T] + s2 * a[XT]);
            r[T] += gg * (s3 * a[X] * a[Y] + s2 * a[XY]);
            r[XT] += gg * s2 * a[Y];
            r[YT] += gg * s2 * a[X];
            r[XY] += gg * s2 * a[T];
        }
        r[XYT] = gg * s1;
        for (d, dd, dt, ddt) in [(X, XX, XT, XXT), (Y, YY, YT, YYT)] {
            let gg = g[ddt];
            if gg == 0.0 {
                continue;
            }
            r[V] += gg
                * (s4 * a[d] * a[d] * a[T]
                    + s3 * (2.0 * a[d] * a[dt] + a[dd] * a[T])
                    + s2 * a[ddt]);
            r[d] += gg * (2.0 * s3 * a[d] * a[T] + 2.0 * s2 * a[dt]);
            r[T] += gg * (s3 * a[d] * a[d] + s2 * a[dd]);
            r[dt] += gg * 2.0 * s2 * a[d];
            r[dd] += gg * s2 * a[T];
            r[ddt] = gg * s1;
        }
    }
    r
}
