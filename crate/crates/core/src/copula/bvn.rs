//! Bivariate standard normal CDF after Genz (2004), "Numerical computation
//! of rectangular bivariate and trivariate normal and t probabilities".

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::normal;
use crate::quadrature::GaussLegendre;

fn rules() -> &'static [GaussLegendre; 3] {
    static RULES: OnceLock<[GaussLegendre; 3]> = OnceLock::new();
    RULES.get_or_init(|| {
        [
            GaussLegendre::new(6),
            GaussLegendre::new(12),
            GaussLegendre::new(20),
        ]
    })
}

/// `P(X <= h, Y <= k)` for standard normals with correlation `r`.
pub fn bivariate_normal_cdf(h: f64, k: f64, r: f64) -> f64 {
    upper(-h, -k, r)
}

/// `P(X > h, Y > k)`.
fn upper(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return if k == f64::NEG_INFINITY {
            1.0
        } else {
            normal::cdf(-k)
        };
    }
    if k == f64::NEG_INFINITY {
        return normal::cdf(-h);
    }
    if r == 0.0 {
        return normal::cdf(-h) * normal::cdf(-k);
    }
    let gl = if r.abs() < 0.3 {
        &rules()[0]
    } else if r.abs() < 0.75 {
        &rules()[1]
    } else {
        &rules()[2]
    };
    let tp = 2.0 * PI;
    let mut hk = h * k;
    let bvn = if r.abs() < 0.925 {
        // Integrate over θ ∈ (0, asin r) in the Sheppard-type representation.
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin() / 2.0;
        let mut s = 0.0;
        for (&x, &w) in gl.nodes().iter().zip(gl.weights()) {
            let sn = (asr * (1.0 + x)).sin();
            s += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
        }
        s * asr / tp + normal::cdf(-h) * normal::cdf(-k)
    } else {
        let mut k = k;
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        let mut bvn = 0.0;
        if r.abs() < 1.0 {
            let as_ = 1.0 - r * r;
            let mut a = as_.sqrt();
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 80.0;
            let asr = -(bs / as_ + hk) / 2.0;
            if asr > -100.0 {
                bvn = a * asr.exp() * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_ * as_);
            }
            if hk > -100.0 {
                let b = bs.sqrt();
                let sp = tp.sqrt() * normal::cdf(-b / a);
                bvn -= (-hk / 2.0).exp() * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
            }
            a /= 2.0;
            let mut s = 0.0;
            for (&x, &w) in gl.nodes().iter().zip(gl.weights()) {
                let t = a * (1.0 + x);
                let xs = t * t;
                let asr = -(bs / xs + hk) / 2.0;
                if asr > -100.0 {
                    let sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                    let rs = (1.0 - xs).sqrt();
                    let ep = (-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))).exp() / rs;
                    s += w * asr.exp() * (sp - ep);
                }
            }
            bvn = (a * s - bvn) / tp;
        }
        if r > 0.0 {
            bvn + normal::cdf(-h.max(k))
        } else if h >= k {
            -bvn
        } else {
            let l = if h < 0.0 {
                normal::cdf(k) - normal::cdf(h)
            } else {
                normal::cdf(-h) - normal::cdf(-k)
            };
            l - bvn
        }
    };
    bvn.clamp(0.0, 1.0)
}
