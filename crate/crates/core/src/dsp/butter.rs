//! Butterworth IIR design (analog prototype, frequency transform, bilinear
//! map) realized as cascaded second-order sections, plus causal and
//! zero-phase filtering.

use std::f64::consts::PI;

use num_complex::Complex64;

/// One biquad in direct-form II transposed. `a[0]` is normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2) / (self.a[0] + self.a[1] * z1 + self.a[2] * z2)
    }

    /// Steady-state DF2T state for a unit step input.
    fn step_state(&self) -> [f64; 2] {
        let y = self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>();
        let z2 = self.b[2] - self.a[2] * y;
        let z1 = self.b[1] - self.a[1] * y + z2;
        [z1, z2]
    }

    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Band {
    Lowpass(f64),
    Highpass(f64),
    Bandpass(f64, f64),
    Bandstop(f64, f64),
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    /// Butterworth design of prototype order `order`. Band-pass and
    /// band-stop designs have twice that many poles.
    pub fn butterworth(order: usize, band: Band, fs: f64) -> Sos {
        assert!(order > 0, "filter order must be positive");
        let fs2 = 2.0 * fs;
        let warp = |f: f64| fs2 * (PI * f / fs).tan();

        let proto: Vec<Complex64> = (0..order)
            .map(|k| {
                let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
                Complex64::from_polar(1.0, theta)
            })
            .collect();

        let (zeros, poles, gain) = match band {
            Band::Lowpass(f) => {
                let wo = warp(f);
                let poles: Vec<_> = proto.iter().map(|p| p * wo).collect();
                (Vec::new(), poles, wo.powi(order as i32))
            }
            Band::Highpass(f) => {
                let wo = warp(f);
                let poles: Vec<_> = proto.iter().map(|p| wo / p).collect();
                let prod: Complex64 = proto.iter().map(|p| -p).product();
                (vec![Complex64::new(0.0, 0.0); order], poles, 1.0 / prod.re)
            }
            Band::Bandpass(lo, hi) => {
                let (wl, wh) = (warp(lo), warp(hi));
                let bw = wh - wl;
                let wo = (wl * wh).sqrt();
                let mut poles = Vec::with_capacity(2 * order);
                for p in &proto {
                    let pl = p * (bw / 2.0);
                    let root = (pl * pl - wo * wo).sqrt();
                    poles.push(pl + root);
                    poles.push(pl - root);
                }
                (vec![Complex64::new(0.0, 0.0); order], poles, bw.powi(order as i32))
            }
            Band::Bandstop(lo, hi) => {
                let (wl, wh) = (warp(lo), warp(hi));
                let bw = wh - wl;
                let wo = (wl * wh).sqrt();
                let mut poles = Vec::with_capacity(2 * order);
                for p in &proto {
                    let ph = (bw / 2.0) / p;
                    let root = (ph * ph - wo * wo).sqrt();
                    poles.push(ph + root);
                    poles.push(ph - root);
                }
                let mut zeros = Vec::with_capacity(2 * order);
                for _ in 0..order {
                    zeros.push(Complex64::new(0.0, wo));
                    zeros.push(Complex64::new(0.0, -wo));
                }
                let prod: Complex64 = proto.iter().map(|p| -p).product();
                (zeros, poles, 1.0 / prod.re)
            }
        };

        // Bilinear transform.
        let degree = poles.len() - zeros.len();
        let fs2c = Complex64::new(fs2, 0.0);
        let num: Complex64 = zeros.iter().map(|z| fs2c - z).product();
        let den: Complex64 = poles.iter().map(|p| fs2c - p).product();
        let k = gain * (num / den).re;
        let mut zd: Vec<Complex64> = zeros.iter().map(|z| (fs2c + z) / (fs2c - z)).collect();
        zd.extend(std::iter::repeat(Complex64::new(-1.0, 0.0)).take(degree));
        let pd: Vec<Complex64> = poles.iter().map(|p| (fs2c + p) / (fs2c - p)).collect();

        Sos::from_zpk(&zd, &pd, k)
    }

    fn from_zpk(zeros: &[Complex64], poles: &[Complex64], gain: f64) -> Sos {
        let pole_pairs = conjugate_pairs(poles);
        let mut zero_pairs = conjugate_pairs(zeros);
        let mut sections = Vec::with_capacity(pole_pairs.len());
        for (p1, p2) in pole_pairs {
            // Nearest zero pair to this pole pair.
            let (idx, _) = zero_pairs
                .iter()
                .enumerate()
                .map(|(i, (z1, _))| (i, (z1 - p1).norm()))
                .fold((usize::MAX, f64::INFINITY), |best, cur| {
                    if cur.1 < best.1 {
                        cur
                    } else {
                        best
                    }
                });
            let (z1, z2) = if idx == usize::MAX {
                (None, None)
            } else {
                let (z1, z2) = zero_pairs.remove(idx);
                (Some(z1), z2)
            };
            sections.push(Biquad {
                b: poly2(z1, z2),
                a: poly2(Some(p1), p2),
            });
        }
        if let Some(first) = sections.first_mut() {
            for b in first.b.iter_mut() {
                *b *= gain;
            }
        }
        Sos { sections }
    }

    /// Complex frequency response at `f` Hz.
    pub fn response(&self, f: f64, fs: f64) -> Complex64 {
        let w = 2.0 * PI * f / fs;
        self.sections.iter().map(|s| s.response(w)).product()
    }

    /// Causal filtering with an explicit initial state per section.
    fn filter_with_state(&self, x: &[f64], state: &mut [[f64; 2]]) -> Vec<f64> {
        let mut buf = x.to_vec();
        for (s, z) in self.sections.iter().zip(state.iter_mut()) {
            for v in buf.iter_mut() {
                let xin = *v;
                let y = s.b[0] * xin + z[0];
                z[0] = s.b[1] * xin - s.a[1] * y + z[1];
                z[1] = s.b[2] * xin - s.a[2] * y;
                *v = y;
            }
        }
        buf
    }

    /// Causal filtering from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut state = vec![[0.0; 2]; self.sections.len()];
        self.filter_with_state(x, &mut state)
    }

    /// Step-response steady state of every section, scaled for a unit input.
    fn initial_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let z = s.step_state();
                let out = [z[0] * scale, z[1] * scale];
                scale *= s.dc_gain();
                out
            })
            .collect()
    }

    /// Forward-backward (zero-phase) filtering with odd-extension padding
    /// and steady-state initial conditions, so the output has the squared
    /// magnitude response and no phase shift.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let padlen = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * padlen);
        for i in (1..=padlen).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=padlen {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }

        let zi = self.initial_state();
        let mut state: Vec<[f64; 2]> = zi
            .iter()
            .map(|z| [z[0] * ext[0], z[1] * ext[0]])
            .collect();
        let mut y = self.filter_with_state(&ext, &mut state);
        y.reverse();
        let mut state: Vec<[f64; 2]> = zi.iter().map(|z| [z[0] * y[0], z[1] * y[0]]).collect();
        let mut y = self.filter_with_state(&y, &mut state);
        y.reverse();
        y[padlen..padlen + n].to_vec()
    }
}

/// Groups roots into conjugate pairs; real roots are paired with each other.
fn conjugate_pairs(roots: &[Complex64]) -> Vec<(Complex64, Option<Complex64>)> {
    const TOL: f64 = 1e-10;
    let mut complex: Vec<Complex64> = roots.iter().copied().filter(|r| r.im > TOL).collect();
    complex.sort_by(|a, b| {
        (1.0 - a.norm())
            .abs()
            .partial_cmp(&(1.0 - b.norm()).abs())
            .unwrap()
    });
    let mut reals: Vec<f64> = roots
        .iter()
        .filter(|r| r.im.abs() <= TOL)
        .map(|r| r.re)
        .collect();
    reals.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut pairs: Vec<(Complex64, Option<Complex64>)> =
        complex.into_iter().map(|c| (c, Some(c.conj()))).collect();
    let mut it = reals.chunks(2);
    for chunk in &mut it {
        let first = Complex64::new(chunk[0], 0.0);
        let second = chunk.get(1).map(|&r| Complex64::new(r, 0.0));
        pairs.push((first, second));
    }
    pairs
}

/// Real coefficients of (1 - r1 z^-1)(1 - r2 z^-1).
fn poly2(r1: Option<Complex64>, r2: Option<Complex64>) -> [f64; 3] {
    match (r1, r2) {
        (None, _) => [1.0, 0.0, 0.0],
        (Some(a), None) => [1.0, -a.re, 0.0],
        (Some(a), Some(b)) => {
            let s = a + b;
            let p = a * b;
            [1.0, -s.re, p.re]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gain_db(sos: &Sos, f: f64, fs: f64) -> f64 {
        20.0 * sos.response(f, fs).norm().log10()
    }

    #[test]
    fn lowpass_is_minus_3db_at_cutoff() {
        let sos = Sos::butterworth(4, Band::Lowpass(50.0), 500.0);
        assert!((gain_db(&sos, 50.0, 500.0) + 3.0103).abs() < 1e-3);
        assert!(gain_db(&sos, 1.0, 500.0).abs() < 1e-6);
    }

    #[test]
    fn highpass_and_bandpass_corners() {
        let hp = Sos::butterworth(4, Band::Highpass(10.0), 500.0);
        assert!((gain_db(&hp, 10.0, 500.0) + 3.0103).abs() < 1e-3);
        assert!(gain_db(&hp, 200.0, 500.0).abs() < 1e-3);

        let bp = Sos::butterworth(2, Band::Bandpass(20.0, 150.0), 500.0);
        assert_eq!(bp.sections.len(), 2);
        assert!((gain_db(&bp, 20.0, 500.0) + 3.0103).abs() < 1e-3);
        assert!((gain_db(&bp, 150.0, 500.0) + 3.0103).abs() < 1e-3);
        assert!(gain_db(&bp, (20.0f64 * 150.0).sqrt(), 500.0).abs() < 1e-2);
    }

    #[test]
    fn bandstop_has_deep_null_at_centre() {
        let bs = Sos::butterworth(1, Band::Bandstop(59.0, 61.0), 500.0);
        assert_eq!(bs.sections.len(), 1);
        assert!(gain_db(&bs, 60.0, 500.0) < -40.0);
        assert!(gain_db(&bs, 100.0, 500.0).abs() < 0.1);
    }

    #[test]
    fn filtfilt_preserves_constant_through_lowpass() {
        let sos = Sos::butterworth(2, Band::Lowpass(30.0), 500.0);
        let y = sos.filtfilt(&[2.5; 200]);
        assert!(y.iter().all(|v| (v - 2.5).abs() < 1e-9));
    }
}
