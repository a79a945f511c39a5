//! Wall-time and peak-allocation benchmark of Fourier SHAP against Kernel SHAP.
//!
//! Peak memory comes from [`CountingAllocator`] when the binary installs it as
//! the global allocator; otherwise the resident-set delta is reported.

use std::alloc::{GlobalAlloc, Layout, System};
use std::io::Write;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::time::Instant;

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{format_f64, ProductMeasure};
use crate::predictor::Predictor;
use crate::shap::{fourier_shap, kernel_shap, KernelShapConfig, Method};
use crate::spectral::SparseFourierModel;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);
static ACTIVE: AtomicBool = AtomicBool::new(false);

/// System allocator wrapper tracking live and peak heap bytes.
///
/// Install with `#[global_allocator] static A: CountingAllocator = CountingAllocator;`.
pub struct CountingAllocator;

unsafe impl GlobalAlloc for CountingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            record_alloc(layout.size());
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc_zeroed(layout);
        if !p.is_null() {
            record_alloc(layout.size());
        }
        p
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = System.realloc(ptr, layout, new_size);
        if !p.is_null() {
            CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
            record_alloc(new_size);
        }
        p
    }
}

fn record_alloc(size: usize) {
    let now = CURRENT.fetch_add(size, Ordering::Relaxed) + size;
    PEAK.fetch_max(now, Ordering::Relaxed);
    if !ACTIVE.load(Ordering::Relaxed) {
        ACTIVE.store(true, Ordering::Relaxed);
    }
}

/// Whether [`CountingAllocator`] is serving allocations in this process.
pub fn allocator_active() -> bool {
    ACTIVE.load(Ordering::Relaxed)
}

/// Restarts peak tracking at the current live size and returns it.
pub fn reset_peak() -> usize {
    let now = CURRENT.load(Ordering::Relaxed);
    PEAK.store(now, Ordering::Relaxed);
    now
}

pub fn peak_bytes() -> usize {
    PEAK.load(Ordering::Relaxed)
}

/// Resident set size from `/proc/self/statm`, assuming 4 KiB pages.
pub fn resident_bytes() -> Option<usize> {
    let text = std::fs::read_to_string("/proc/self/statm").ok()?;
    let pages: usize = text.split_whitespace().nth(1)?.parse().ok()?;
    Some(pages * 4096)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchConfig {
    pub warmup: usize,
    pub reps: usize,
    pub kernel_budget: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            warmup: 3,
            reps: 10,
            kernel_budget: 512,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: Method,
    pub instances: usize,
    pub reps: usize,
    /// Median over repetitions of the time to explain all instances.
    pub median_seconds: f64,
    pub per_instance_seconds: f64,
    /// Transient heap peak in bytes (allocator counter or resident-set delta).
    pub peak_mem_estimate: usize,
    pub peak_mem_source: &'static str,
    /// Kernel time over this method's time.
    pub speedup: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m == 0 {
        return f64::NAN;
    }
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Runs `f` `warmup` times untimed, then `reps` timed times; returns the
/// median seconds and the largest transient peak seen.
pub fn measure<F: FnMut() -> Result<()>>(warmup: usize, reps: usize, mut f: F) -> Result<(f64, usize, &'static str)> {
    for _ in 0..warmup {
        f()?;
    }
    let mut times = Vec::with_capacity(reps);
    let mut peak = 0usize;
    let counting = allocator_active();
    for _ in 0..reps {
        let base = if counting { reset_peak() } else { 0 };
        let rss0 = resident_bytes();
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_secs_f64());
        let used = if counting {
            peak_bytes().saturating_sub(base)
        } else {
            match (rss0, resident_bytes()) {
                (Some(a), Some(b)) => b.saturating_sub(a),
                _ => 0,
            }
        };
        peak = peak.max(used);
    }
    let source = if counting { "allocator" } else { "rss_delta" };
    Ok((median(&mut times), peak, source))
}

/// Times Fourier SHAP on `model` and Kernel SHAP on `baseline` over the same
/// instances, single-threaded.
pub fn benchmark(
    model: &SparseFourierModel,
    baseline: &dyn Predictor,
    measure_mu: &ProductMeasure,
    instances: &[Vec<usize>],
    config: &BenchConfig,
) -> Result<Vec<BenchRow>> {
    if instances.is_empty() {
        return Err(Error::Data("benchmark needs at least one instance".into()));
    }
    if config.reps == 0 {
        return Err(Error::Parameter("benchmark needs at least one repetition".into()));
    }
    if config.reps < 10 {
        warn!("{} repetitions; medians over fewer than 10 are noisy", config.reps);
    }
    let kernel_config = KernelShapConfig {
        budget: config.kernel_budget,
        seed: config.seed,
    };
    let (t_f, mem_f, src_f) = measure(config.warmup, config.reps, || {
        for x in instances {
            std::hint::black_box(fourier_shap(model, x)?);
        }
        Ok(())
    })?;
    let (t_k, mem_k, src_k) = measure(config.warmup, config.reps, || {
        for x in instances {
            std::hint::black_box(kernel_shap(baseline, x, measure_mu, &kernel_config)?);
        }
        Ok(())
    })?;
    let count = instances.len();
    let row = |method, t: f64, mem, src| BenchRow {
        method,
        instances: count,
        reps: config.reps,
        median_seconds: t,
        per_instance_seconds: t / count as f64,
        peak_mem_estimate: mem,
        peak_mem_source: src,
        speedup: t_k / t,
    };
    Ok(vec![row(Method::Fourier, t_f, mem_f, src_f), row(Method::Kernel, t_k, mem_k, src_k)])
}

pub fn write_bench_csv(rows: &[BenchRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method",
        "instances",
        "reps",
        "median_seconds",
        "per_instance_seconds",
        "peak_mem_estimate",
        "peak_mem_source",
        "speedup",
    ])?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.instances.to_string(),
            r.reps.to_string(),
            format_f64(r.median_seconds),
            format_f64(r.per_instance_seconds),
            r.peak_mem_estimate.to_string(),
            r.peak_mem_source.to_string(),
            format_f64(r.speedup),
        ])?;
    }
    w.flush()?;
    Ok(())
}
