//! Band-limited sample-rate conversion: 64-tap Kaiser-windowed sinc.

use crate::audio::{AudioClip, AudioError};

const TAPS: usize = 64;
const HALF_TAPS: i64 = (TAPS / 2) as i64;
const KAISER_BETA: f64 = 8.6;

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half_x = x / 2.0;
    for k in 1..=30 {
        term *= (half_x / k as f64) * (half_x / k as f64);
        sum += term;
        if term < 1e-16 * sum {
            break;
        }
    }
    sum
}

fn kaiser(t: f64, half_width: f64) -> f64 {
    let ratio = t / half_width;
    if ratio.abs() >= 1.0 {
        return 0.0;
    }
    bessel_i0(KAISER_BETA * (1.0 - ratio * ratio).sqrt()) / bessel_i0(KAISER_BETA)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Resamples to `target_rate` by windowed-sinc interpolation.
///
/// The identity conversion returns the clip unchanged. Duration is preserved
/// to within one sample period; when downsampling, the kernel cuts off at the
/// target Nyquist.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::InvalidSampleRate(target_rate));
    }
    if target_rate == clip.sample_rate {
        return Ok(clip.clone());
    }
    let src_rate = clip.sample_rate as f64;
    let dst_rate = target_rate as f64;
    let ratio = dst_rate / src_rate;
    let out_len = (clip.len() as u64 * target_rate as u64 / clip.sample_rate as u64) as usize;

    // Cutoff at the lower Nyquist, in cycles per input sample.
    let cutoff = 0.5 * ratio.min(1.0);
    // When downsampling the kernel stretches by 1/ratio; gain compensates so
    // passband amplitude stays unity.
    let gain = (2.0 * cutoff).min(1.0);

    let input = &clip.samples;
    let n = input.len() as i64;
    let mut out = Vec::with_capacity(out_len);
    for j in 0..out_len {
        let pos = j as f64 / ratio;
        let center = pos.floor() as i64;
        let mut acc = 0.0f64;
        for k in (center - HALF_TAPS + 1)..=(center + HALF_TAPS) {
            if k < 0 || k >= n {
                continue;
            }
            let t = k as f64 - pos;
            let w = kaiser(t, HALF_TAPS as f64);
            if w == 0.0 {
                continue;
            }
            acc += input[k as usize] as f64 * gain * sinc(2.0 * cutoff * t) * w;
        }
        out.push(acc as f32);
    }

    let mut result = AudioClip {
        samples: out,
        sample_rate: target_rate,
    };
    if result.peak() > 1.0 {
        result.peak_normalize(1.0);
    }
    Ok(result)
}
