//! Overlap-and-save block processing.
//!
//! The input stream is cut into length-`N` windows advancing by `V = N - O`
//! samples. Each window is handed to a per-block chain; the first and last
//! `O/2` samples of the processed window are discarded and the centre `V`
//! samples are written to the output.

use serde::{Deserialize, Serialize};

use crate::dsp::block::SampleBlock;
use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OlsGeometry {
    pub fft_size: usize,
    pub overlap: usize,
}

/// How samples outside the stream are supplied to edge windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgePolicy {
    #[default]
    Zero,
    Circular,
}

impl OlsGeometry {
    pub fn new(fft_size: usize, overlap: usize) -> Result<Self> {
        let geom = OlsGeometry { fft_size, overlap };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.fft_size.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(self.fft_size));
        }
        if self.overlap == 0 || self.overlap >= self.fft_size {
            return Err(Error::Geometry(format!(
                "overlap {} must lie strictly between 0 and the FFT size {}",
                self.overlap, self.fft_size
            )));
        }
        if self.overlap % 2 != 0 {
            return Err(Error::Geometry(format!("overlap {} must be even", self.overlap)));
        }
        Ok(())
    }

    /// Output samples produced per window.
    pub fn valid(&self) -> usize {
        self.fft_size - self.overlap
    }

    /// Samples discarded at the start (and at the end) of each window.
    pub fn half_overlap(&self) -> usize {
        self.overlap / 2
    }

    pub fn num_blocks(&self, len: usize) -> usize {
        len.div_ceil(self.valid())
    }

    /// Stream index of the first sample of window `block`.
    pub fn window_start(&self, block: usize) -> i64 {
        (block * self.valid()) as i64 - self.half_overlap() as i64
    }

    /// Copy window `block` of every polarization into `out`.
    pub fn gather(&self, pols: &[Vec<C64>], block: usize, edge: EdgePolicy, out: &mut [Vec<C64>]) {
        let start = self.window_start(block);
        for (src, dst) in pols.iter().zip(out.iter_mut()) {
            let len = src.len() as i64;
            dst.resize(self.fft_size, C64::new(0.0, 0.0));
            for (j, d) in dst.iter_mut().enumerate() {
                let idx = start + j as i64;
                *d = if (0..len).contains(&idx) {
                    src[idx as usize]
                } else {
                    match edge {
                        EdgePolicy::Zero => C64::new(0.0, 0.0),
                        EdgePolicy::Circular => src[idx.rem_euclid(len) as usize],
                    }
                };
            }
        }
    }

    /// Range of stream indices written by window `block`, and the offset of
    /// the first kept sample inside the window.
    pub fn kept_range(&self, block: usize, len: usize) -> (std::ops::Range<usize>, usize) {
        let lo = block * self.valid();
        let hi = (lo + self.valid()).min(len);
        (lo..hi, self.half_overlap())
    }
}

/// Run `chain` over every window of a multi-polarization stream.
pub fn overlap_save_multi<F>(
    pols: &[Vec<C64>],
    geom: &OlsGeometry,
    edge: EdgePolicy,
    mut chain: F,
) -> Result<Vec<Vec<C64>>>
where
    F: FnMut(&mut [Vec<C64>]) -> Result<()>,
{
    geom.validate()?;
    let len = pols.first().map_or(0, |p| p.len());
    if len == 0 || pols.iter().any(|p| p.len() != len) {
        return Err(Error::InvalidArgument(
            "overlap-save input must be non-empty with equal-length polarizations".into(),
        ));
    }
    let mut out = vec![vec![C64::new(0.0, 0.0); len]; pols.len()];
    let mut work = vec![Vec::with_capacity(geom.fft_size); pols.len()];
    for block in 0..geom.num_blocks(len) {
        geom.gather(pols, block, edge, &mut work);
        chain(&mut work)?;
        let (range, offset) = geom.kept_range(block, len);
        for (dst, src) in out.iter_mut().zip(&work) {
            let n = range.len();
            dst[range.clone()].copy_from_slice(&src[offset..offset + n]);
        }
    }
    Ok(out)
}

/// Single-stream overlap-save with zero-padded edges.
pub fn overlap_save_apply<F>(signal: &SampleBlock, geom: &OlsGeometry, mut chain: F) -> Result<SampleBlock>
where
    F: FnMut(&mut [C64]),
{
    signal.validate()?;
    let out = overlap_save_multi(
        std::slice::from_ref(&signal.samples),
        geom,
        EdgePolicy::Zero,
        |blocks| {
            chain(&mut blocks[0]);
            Ok(())
        },
    )?;
    Ok(SampleBlock {
        samples: out.into_iter().next().expect("one polarization"),
        sample_rate: signal.sample_rate,
        center_freq_offset: signal.center_freq_offset,
    })
}
