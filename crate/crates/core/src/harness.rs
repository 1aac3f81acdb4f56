//! Parallel Monte Carlo block-error-rate estimation.
//!
//! Trial `t` of a run with seed `s` always draws from
//! `RngStream::new(s, stream_base + t)`. Trials are grouped into fixed-size
//! chunks that are evaluated in parallel and then scanned in index order; the
//! stop rule is applied at chunk boundaries during that scan. The outcome
//! therefore depends only on `(seed, config)`, never on the worker count or
//! on scheduling.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::RateSpec;
use crate::codecs::{AnalyticCodec, GnCodec, PbCodec, SkCodec};
use crate::error::{config, Error, Result};
use crate::rng::RngStream;
use crate::scalar::Real;

/// Trials per chunk; the granularity of the stop rule.
pub const CHUNK: u64 = 4096;
/// Estimates with fewer errors than this are flagged unresolved.
pub const MIN_ERRORS: u64 = 10;
/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Anything whose block error rate can be estimated trial by trial.
pub trait BlerSource: Sync {
    fn label(&self) -> String;
    fn rate(&self) -> RateSpec;
    fn snr_ff_db(&self) -> f64;
    fn snr_fb_db(&self) -> Option<f64>;

    /// Runs trials `first..first + n`, trial `t` drawing from
    /// `RngStream::new(seed, stream_base + t)`, and returns how many failed.
    fn count_errors(&self, seed: u64, stream_base: u64, first: u64, n: u64) -> Result<u64>;
}

macro_rules! analytic_source {
    ($ty:ident) => {
        impl<T: Real> BlerSource for $ty<T> {
            fn label(&self) -> String {
                self.scheme().to_string()
            }

            fn rate(&self) -> RateSpec {
                AnalyticCodec::rate(self)
            }

            fn snr_ff_db(&self) -> f64 {
                self.channel().snr_ff_db
            }

            fn snr_fb_db(&self) -> Option<f64> {
                self.channel().snr_fb_db
            }

            fn count_errors(&self, seed: u64, stream_base: u64, first: u64, n: u64) -> Result<u64> {
                let mut errs = 0;
                for t in first..first + n {
                    let mut rng = RngStream::new(seed, stream_base.wrapping_add(t));
                    if self.simulate_random(&mut rng)? {
                        errs += 1;
                    }
                }
                Ok(errs)
            }
        }
    };
}

analytic_source!(SkCodec);
analytic_source!(GnCodec);
analytic_source!(PbCodec);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRule {
    pub max_trials: u64,
    pub target_errors: u64,
}

impl StopRule {
    pub fn new(max_trials: u64, target_errors: u64) -> Result<Self> {
        if max_trials == 0 || target_errors == 0 {
            return config("max_trials and target_errors must both be >= 1");
        }
        Ok(Self {
            max_trials,
            target_errors,
        })
    }

    /// Exactly `n` trials, no early stop.
    pub fn fixed(n: u64) -> Result<Self> {
        Self::new(n, u64::MAX)
    }

    fn effective_target(&self) -> u64 {
        self.target_errors.max(MIN_ERRORS)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlerEstimate {
    pub trials: u64,
    pub errors: u64,
    pub bler: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub wall_time_s: f64,
}

impl BlerEstimate {
    pub fn from_counts(errors: u64, trials: u64, seed: u64, wall_time_s: f64) -> Result<Self> {
        if trials == 0 || errors > trials {
            return Err(Error::Config(format!("invalid counts: {errors} errors in {trials} trials")));
        }
        let bler = errors as f64 / trials as f64;
        let (ci_low, ci_high) = wilson_interval(errors, trials, Z95);
        Ok(Self {
            trials,
            errors,
            bler,
            ci_low,
            ci_high,
            seed,
            wall_time_s,
        })
    }

    pub fn resolved(&self) -> bool {
        self.errors >= MIN_ERRORS
    }

    /// Half-width of the 95% Wilson interval expressed as one standard error.
    pub fn wilson_se(&self) -> f64 {
        (self.ci_high - self.ci_low) / (2.0 * Z95)
    }

    /// `|bler - reference|` in Wilson standard errors.
    pub fn deviation_in_se(&self, reference: f64) -> f64 {
        (self.bler - reference).abs() / self.wilson_se()
    }

    /// True when the two 95% intervals are disjoint.
    pub fn separated_from(&self, other: &BlerEstimate) -> bool {
        self.ci_high < other.ci_low || other.ci_high < self.ci_low
    }
}

/// Wilson score interval for `errors` successes in `trials`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn run_estimate<S: BlerSource + ?Sized>(
    source: &S,
    stop: StopRule,
    seed: u64,
    stream_base: u64,
    pool: &rayon::ThreadPool,
) -> Result<BlerEstimate> {
    let start = Instant::now();
    let target = stop.effective_target();
    let wave_len = (pool.current_num_threads() as u64 * 4).max(4);
    let (mut trials, mut errors) = (0u64, 0u64);
    let mut next_chunk = 0u64;
    'outer: while trials < stop.max_trials {
        let chunks: Vec<(u64, u64)> = (next_chunk..next_chunk + wave_len)
            .map(|c| {
                let first = c * CHUNK;
                (first, CHUNK.min(stop.max_trials.saturating_sub(first)))
            })
            .take_while(|&(_, n)| n > 0)
            .collect();
        next_chunk += wave_len;
        let counts: Vec<Result<u64>> = pool.install(|| {
            chunks
                .par_iter()
                .map(|&(first, n)| source.count_errors(seed, stream_base, first, n))
                .collect()
        });
        for ((_, n), count) in chunks.iter().zip(counts) {
            trials += n;
            errors += count?;
            if errors >= target || trials >= stop.max_trials {
                break 'outer;
            }
        }
    }
    BlerEstimate::from_counts(errors, trials, seed, start.elapsed().as_secs_f64())
}

/// Estimates the BLER of `source` with `workers` threads.
pub fn estimate_bler<S: BlerSource + ?Sized>(source: &S, stop: StopRule, seed: u64, workers: usize) -> Result<BlerEstimate> {
    run_estimate(source, stop, seed, 0, &pool(workers)?)
}

/// Stream offset of sweep point `i`; keeps the points' trial streams disjoint.
pub fn sweep_stream_base(point: usize) -> u64 {
    (point as u64) << 40
}

/// One estimate per SNR in `snr_list_db` (strictly increasing), each on its
/// own block of streams. `make` builds the source for a given forward SNR.
pub fn sweep_bler<S, F>(
    make: F,
    snr_list_db: &[f64],
    stop: StopRule,
    seed: u64,
    workers: usize,
) -> Result<Vec<(f64, BlerEstimate)>>
where
    S: BlerSource,
    F: Fn(f64) -> Result<S>,
{
    if snr_list_db.windows(2).any(|w| !(w[0] < w[1])) {
        return config("SNR list must be strictly increasing");
    }
    let pool = pool(workers)?;
    snr_list_db
        .iter()
        .enumerate()
        .map(|(i, &db)| {
            let source = make(db)?;
            Ok((db, run_estimate(&source, stop, seed, sweep_stream_base(i), &pool)?))
        })
        .collect()
}

/// `%.9g`-style formatting used for every float written to CSV/JSON.
pub fn fmt_g9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..9).contains(&exp) {
        let s = format!("{x:.8e}");
        let (mant, e) = s.split_once('e').expect("exponent form");
        let mant = trim_zeros(mant);
        let e: i32 = e.parse().expect("integer exponent");
        return format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds to 9 significant digits, so JSON output matches the CSV text.
pub fn round_g9(x: f64) -> f64 {
    fmt_g9(x).parse().unwrap_or(x)
}

/// One output row of a BLER run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub struct BlerRecord {
    pub scheme: String,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub snr_ff_db: f64,
    /// A dB value, or `"noiseless"`.
    pub snr_fb_db: String,
    pub trials: u64,
    pub errors: u64,
    pub bler: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl BlerRecord {
    pub const HEADER: &'static str = "scheme,K,D,snr_ff_db,snr_fb_db,trials,errors,bler,ci_low,ci_high,seed";

    pub fn new<S: BlerSource + ?Sized>(source: &S, est: &BlerEstimate) -> Self {
        let rate = source.rate();
        Self {
            scheme: source.label(),
            k: rate.k,
            d: rate.d,
            snr_ff_db: round_g9(source.snr_ff_db()),
            snr_fb_db: source.snr_fb_db().map_or_else(|| "noiseless".to_string(), fmt_g9),
            trials: est.trials,
            errors: est.errors,
            bler: round_g9(est.bler),
            ci_low: round_g9(est.ci_low),
            ci_high: round_g9(est.ci_high),
            seed: est.seed,
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.scheme,
            self.k,
            self.d,
            fmt_g9(self.snr_ff_db),
            self.snr_fb_db,
            self.trials,
            self.errors,
            fmt_g9(self.bler),
            fmt_g9(self.ci_low),
            fmt_g9(self.ci_high),
            self.seed
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }

    pub fn resolved(&self) -> bool {
        self.errors >= MIN_ERRORS
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelSpec;

    /// Fails each trial independently with probability `p`.
    struct Bernoulli {
        p: f64,
    }

    impl BlerSource for Bernoulli {
        fn label(&self) -> String {
            "bernoulli".into()
        }
        fn rate(&self) -> RateSpec {
            RateSpec::new(1, 1).unwrap()
        }
        fn snr_ff_db(&self) -> f64 {
            0.0
        }
        fn snr_fb_db(&self) -> Option<f64> {
            None
        }
        fn count_errors(&self, seed: u64, base: u64, first: u64, n: u64) -> Result<u64> {
            Ok((first..first + n)
                .filter(|&t| RngStream::new(seed, base + t).uniform() < self.p)
                .count() as u64)
        }
    }

    #[test]
    fn noiseless_channel_has_no_errors() {
        let c = SkCodec::new(RateSpec::new(3, 9).unwrap(), ChannelSpec::<f64>::noiseless_feedback(f64::INFINITY).unwrap()).unwrap();
        let est = estimate_bler(&c, StopRule::new(10_000, 100).unwrap(), 1, 2).unwrap();
        assert_eq!(est.errors, 0);
        assert_eq!(est.trials, 10_000);
        assert_eq!(est.bler, 0.0);
        assert_eq!(est.ci_low, 0.0);
        assert!(!est.resolved());
    }

    #[test]
    fn fair_coin() {
        let est = estimate_bler(&Bernoulli { p: 0.5 }, StopRule::fixed(100_000).unwrap(), 3, 4).unwrap();
        assert_eq!(est.trials, 100_000);
        assert!(est.bler > 0.49 && est.bler < 0.51);
        assert!(est.ci_low <= est.bler && est.bler <= est.ci_high);
    }

    #[test]
    fn wilson_coverage() {
        let p = 0.02;
        let src = Bernoulli { p };
        let covered = (0..200u64)
            .filter(|&rep| {
                let e = estimate_bler(&src, StopRule::fixed(2_000).unwrap(), 1000 + rep, 1).unwrap();
                e.ci_low <= p && p <= e.ci_high
            })
            .count();
        assert!(covered >= 186, "covered {covered}/200");
    }

    #[test]
    fn wilson_known_values() {
        // 5/100 at z=1.96: (0.02154, 0.11175)
        let (lo, hi) = wilson_interval(5, 100, Z95);
        assert!((lo - 0.021_543).abs() < 1e-5 && (hi - 0.111_750).abs() < 1e-5);
        let (lo, hi) = wilson_interval(0, 50, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.1);
    }

    #[test]
    fn stop_rule_validation() {
        assert!(StopRule::new(0, 10).is_err());
        assert!(StopRule::new(10, 0).is_err());
    }

    #[test]
    fn target_errors_stop_early_but_not_below_ten() {
        let src = Bernoulli { p: 0.1 };
        let est = estimate_bler(&src, StopRule::new(10_000_000, 1).unwrap(), 5, 2).unwrap();
        assert!(est.errors >= MIN_ERRORS);
        assert_eq!(est.trials, CHUNK);
        let est = estimate_bler(&src, StopRule::new(1_000_000, 5_000).unwrap(), 5, 2).unwrap();
        assert!(est.errors >= 5_000 && est.trials < 1_000_000);
        assert_eq!(est.trials % CHUNK, 0);
        let capped = estimate_bler(&src, StopRule::new(5_000, 1_000_000).unwrap(), 5, 2).unwrap();
        assert_eq!(capped.trials, 5_000);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let c = PbCodec::new(RateSpec::new(3, 6).unwrap(), ChannelSpec::<f64>::noiseless_feedback(-2.0).unwrap()).unwrap();
        let stop = StopRule::new(300_000, 50).unwrap();
        let runs: Vec<_> = [1, 4, 16]
            .iter()
            .map(|&w| {
                let e = estimate_bler(&c, stop, 77, w).unwrap();
                (e.trials, e.errors)
            })
            .collect();
        assert!(runs.windows(2).all(|w| w[0] == w[1]), "{runs:?}");
    }

    #[test]
    fn reproducible_records() {
        let c = SkCodec::new(RateSpec::new(3, 6).unwrap(), ChannelSpec::<f64>::noiseless_feedback(0.0).unwrap()).unwrap();
        let stop = StopRule::new(50_000, 30).unwrap();
        let a = BlerRecord::new(&c, &estimate_bler(&c, stop, 9, 3).unwrap());
        let b = BlerRecord::new(&c, &estimate_bler(&c, stop, 9, 1).unwrap());
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn sweep_shapes() {
        let make = |db: f64| SkCodec::new(RateSpec::new(3, 9).unwrap(), ChannelSpec::<f64>::noiseless_feedback(db).unwrap());
        let stop = StopRule::new(200_000, 200).unwrap();
        assert!(sweep_bler(make, &[], stop, 1, 1).unwrap().is_empty());
        assert!(sweep_bler(make, &[0.0, -1.0], stop, 1, 1).is_err());
        let pts = sweep_bler(make, &[-2.0, -1.0, 0.0], stop, 1, 2).unwrap();
        assert_eq!(pts.len(), 3);
        for w in pts.windows(2) {
            // non-increasing unless the intervals overlap
            assert!(!(w[1].1.ci_low > w[0].1.ci_high));
        }
    }

    #[test]
    fn g9_formatting() {
        assert_eq!(fmt_g9(0.0), "0");
        assert_eq!(fmt_g9(-1.0), "-1");
        assert_eq!(fmt_g9(0.5), "0.5");
        assert_eq!(fmt_g9(3.8e-4), "0.00038");
        assert_eq!(fmt_g9(7.65e-9), "7.65e-09");
        assert_eq!(fmt_g9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_g9(123456789.4), "123456789");
        assert_eq!(fmt_g9(1.234e12), "1.234e+12");
        assert_eq!(round_g9(2.0 / 3.0), 0.666666667);
    }

    #[test]
    fn csv_schema() {
        let c = PbCodec::new(RateSpec::new(3, 9).unwrap(), ChannelSpec::<f64>::noiseless_feedback(-1.0).unwrap()).unwrap();
        let est = BlerEstimate::from_counts(3, 1000, 7, 0.1).unwrap();
        let rec = BlerRecord::new(&c, &est);
        assert_eq!(rec.to_csv(), "pb,3,9,-1,noiseless,1000,3,0.003,0.00102078388,0.00878301405,7");
        assert_eq!(BlerRecord::HEADER.split(',').count(), rec.to_csv().split(',').count());
        let v: serde_json::Value = serde_json::from_str(&rec.to_json()).unwrap();
        assert_eq!(v["K"], 3);
        assert_eq!(v["snr_fb_db"], "noiseless");
    }
}
