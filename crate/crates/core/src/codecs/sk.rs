use crate::channel::{ChannelSpec, RateSpec};
use crate::error::{config, Result};
use crate::pam::{make_constellation, MessageBlock, PamConstellation};
use crate::rng::RngStream;
use crate::scalar::Real;

use super::session::{analytic_schedule, CodecSession};
use super::{require_noiseless_feedback, AnalyticCodec, Detection, ResidualMode, Scheme, Transmission};

/// Schalkwijk-Kailath: uncoded PAM in round 1, then `D - 1` rounds that send
/// the normalized error of the receiver's LMMSE estimate.
#[derive(Clone, Debug)]
pub struct SkCodec<T> {
    rate: RateSpec,
    channel: ChannelSpec<T>,
    pam: PamConstellation<T>,
    schedule: Vec<T>,
    detection: Detection,
}

impl<T: Real> SkCodec<T> {
    pub fn new(rate: RateSpec, channel: ChannelSpec<T>) -> Result<Self> {
        rate.require_rounds(2, "SK")?;
        require_noiseless_feedback(&channel, Scheme::Sk)?;
        Ok(Self {
            pam: make_constellation(rate.k)?,
            schedule: analytic_schedule(&channel, rate.d),
            rate,
            channel,
            detection: Detection::default(),
        })
    }

    pub fn with_detection(mut self, detection: Detection) -> Self {
        self.detection = detection;
        self
    }

    pub fn with_residuals(mut self, mode: ResidualMode) -> Result<Self> {
        self.schedule = match mode {
            ResidualMode::Analytic => analytic_schedule(&self.channel, self.rate.d),
            ResidualMode::Empirical { pilot, seed } => {
                empirical_schedule(&self.pam, &self.channel, self.rate.d, pilot, seed)?
            }
        };
        Ok(self)
    }

    pub fn schedule(&self) -> &[T] {
        &self.schedule
    }

    pub fn constellation(&self) -> &PamConstellation<T> {
        &self.pam
    }

    /// A fresh session for amplitude `theta`, running `rounds` analog rounds.
    pub fn session(&self, theta: T, rounds: usize) -> CodecSession<'_, T> {
        CodecSession::new(Scheme::Sk, self.rate, &self.channel, theta, rounds, &self.schedule)
    }

    pub(crate) fn slice(&self, session: &CodecSession<'_, T>) -> Result<usize> {
        let est = match self.detection {
            Detection::Unbiased => session.unbiased_estimate(),
            Detection::Raw => session.estimate,
        };
        self.pam.nearest_symbol(est)
    }

    /// Runs `rounds` SK rounds for `msg` and returns the sliced decision and
    /// the energy spent.
    pub(crate) fn run_rounds(&self, msg: &MessageBlock, rounds: usize, rng: &mut RngStream) -> Result<(usize, T)> {
        let theta = self.pam.bits_to_symbol(msg)?;
        let mut s = self.session(theta, rounds);
        while !s.is_terminal() {
            s.advance(rng)?;
        }
        Ok((self.slice(&s)?, s.energy))
    }
}

impl<T: Real> AnalyticCodec<T> for SkCodec<T> {
    fn scheme(&self) -> Scheme {
        Scheme::Sk
    }

    fn rate(&self) -> RateSpec {
        self.rate
    }

    fn channel(&self) -> &ChannelSpec<T> {
        &self.channel
    }

    fn simulate_codeword(&self, msg: &MessageBlock, rng: &mut RngStream) -> Result<Transmission<T>> {
        let (decoded, energy) = self.run_rounds(msg, self.rate.d, rng)?;
        Ok(Transmission {
            decoded,
            energy,
            phase1: None,
            index_error: None,
        })
    }
}

/// Residual variances measured round by round on `pilot` uniformly drawn
/// codewords, each round normalized by the previous measurement.
pub fn empirical_schedule<T: Real>(
    pam: &PamConstellation<T>,
    channel: &ChannelSpec<T>,
    rounds: usize,
    pilot: usize,
    seed: u64,
) -> Result<Vec<T>> {
    if pilot < 2 {
        return config("empirical residual calibration needs at least 2 pilot codewords");
    }
    let p = channel.power();
    let sp = p.sqrt();
    let s2 = channel.sigma_ff_sq;
    let sigma = channel.sigma_ff();
    let mut rng = RngStream::new(seed, u64::MAX);
    let theta: Vec<T> = (0..pilot).map(|_| pam.amplitude(rng.index(pam.size()))).collect();
    let mut est: Vec<T> = theta
        .iter()
        .map(|&t| sp * (sp * t + sigma * rng.gaussian::<T>()) / (p + s2))
        .collect();
    let mse = |est: &[T]| {
        est.iter().zip(&theta).map(|(&e, &t)| (e - t) * (e - t)).sum::<T>() / T::of_usize(pilot)
    };
    let mut out = vec![mse(&est)];
    for _ in 1..rounds {
        let v = *out.last().expect("non-empty");
        let sv = v.sqrt();
        if sv > T::zero() {
            for (e, &t) in est.iter_mut().zip(&theta) {
                let y = sp * (*e - t) / sv + sigma * rng.gaussian::<T>();
                *e -= sp * sv * y / (p + s2);
            }
        }
        out.push(mse(&est));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulas::{p_sk, FormulaVariant};

    fn codec(db: f64, d: usize) -> SkCodec<f64> {
        SkCodec::new(RateSpec::new(3, d).unwrap(), ChannelSpec::noiseless_feedback(db).unwrap()).unwrap()
    }

    #[test]
    fn rejects_noisy_feedback_and_short_blocks() {
        let rate = RateSpec::new(3, 9).unwrap();
        let noisy = ChannelSpec::<f64>::new(-1.0, Some(10.0)).unwrap();
        assert!(matches!(SkCodec::new(rate, noisy), Err(crate::Error::Unsupported(_))));
        let ch = ChannelSpec::<f64>::noiseless_feedback(0.0).unwrap();
        assert!(SkCodec::new(RateSpec::new(3, 1).unwrap(), ch).is_err());
    }

    #[test]
    fn perfect_forward_link_decodes_everything() {
        let c = codec(f64::INFINITY, 9);
        let mut rng = RngStream::new(0, 0);
        for i in 0..8 {
            let msg = MessageBlock::from_index(i, 3).unwrap();
            assert_eq!(c.simulate_codeword(&msg, &mut rng).unwrap().decoded, i);
        }
    }

    #[test]
    fn residual_variance_follows_recursion() {
        let c = codec(-1.0, 9);
        let n = 1_000_000usize;
        let mut sums = [0.0f64; 9];
        let mut sq = [0.0f64; 9];
        for t in 0..n {
            let mut rng = RngStream::new(3, t as u64);
            let theta = c.pam.amplitude(rng.index(8));
            let mut s = c.session(theta, 9);
            for r in 0..9 {
                s.advance(&mut rng).unwrap();
                let e2 = (s.estimate - theta).powi(2);
                sums[r] += e2;
                sq[r] += e2 * e2;
            }
        }
        for r in 0..9 {
            let mean = sums[r] / n as f64;
            let se = ((sq[r] / n as f64 - mean * mean) / n as f64).sqrt();
            assert!((mean - c.schedule[r]).abs() < 3.0 * se, "round {}: {mean} vs {}", r + 1, c.schedule[r]);
        }
    }

    #[test]
    fn empirical_schedule_tracks_analytic() {
        let c = codec(-1.0, 9)
            .with_residuals(ResidualMode::Empirical { pilot: 200_000, seed: 4 })
            .unwrap();
        let analytic = analytic_schedule(&c.channel, 9);
        for (e, a) in c.schedule().iter().zip(&analytic) {
            assert!((e / a - 1.0).abs() < 0.02, "{e} vs {a}");
        }
    }

    #[test]
    fn two_rounds_beat_one_shot_at_double_power() {
        // S = 0.5 (about -3 dB); one-shot 8-PAM at 2S
        let db = 10.0 * 0.5f64.log10();
        let c = codec(db, 2);
        let n = 1_000_000u64;
        let mut sk_err = 0u64;
        let mut pam_err = 0u64;
        let one_shot_sigma = (1.0 / (2.0 * 0.5f64)).sqrt();
        for t in 0..n {
            let mut rng = RngStream::new(9, t);
            if c.simulate_random(&mut rng).unwrap() {
                sk_err += 1;
            }
            let i = rng.index(8);
            let y = c.pam.amplitude(i) + one_shot_sigma * rng.gaussian::<f64>();
            if c.pam.nearest_symbol(y).unwrap() != i {
                pam_err += 1;
            }
        }
        assert!(sk_err <= pam_err, "sk {sk_err} pam {pam_err}");
    }

    #[test]
    fn matches_lmmse_formula_short_run() {
        // 2e5 codewords at 3/5, -1 dB: p ~ 0.06, 3 SE ~ 0.0016
        let c = SkCodec::new(RateSpec::new(3, 5).unwrap(), ChannelSpec::noiseless_feedback(-1.0).unwrap()).unwrap();
        let p: f64 = p_sk(3, 5, c.channel.snr(), FormulaVariant::Lmmse).unwrap();
        let n = 200_000u64;
        let errs = (0..n)
            .filter(|&t| c.simulate_random(&mut RngStream::new(21, t)).unwrap())
            .count() as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((errs / n as f64 - p).abs() < 3.0 * se, "{} vs {p}", errs / n as f64);
    }

    #[test]
    fn energy_within_budget() {
        let c = codec(-1.0, 9);
        let n = 1_000_000u64;
        let mut e = 0.0;
        for t in 0..n {
            let mut rng = RngStream::new(8, t);
            let msg = MessageBlock::from_index(rng.index(8), 3).unwrap();
            e += c.simulate_codeword(&msg, &mut rng).unwrap().energy;
        }
        assert!(e / n as f64 <= 9.0 * 1.02, "{}", e / n as f64);
    }
}
