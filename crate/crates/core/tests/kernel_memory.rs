//! Peak heap usage of the fused kernel, measured with a counting allocator.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};

use rqc_core::parallel;
use rqc_core::rng::CounterRng;
use rqc_core::tensor::{contract_fused, contract_naive, KernelConfig, Label, Tensor, MAX_RANK};

struct Counting;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() {
            let live = LIVE.fetch_add(layout.size(), Ordering::SeqCst) + layout.size();
            PEAK.fetch_max(live, Ordering::SeqCst);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        LIVE.fetch_sub(layout.size(), Ordering::SeqCst);
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

fn labels(ids: impl IntoIterator<Item = u32>) -> Vec<Label> {
    ids.into_iter().map(Label).collect()
}

const ELEM: usize = 8;
const SLACK: usize = 64 * 1024;

fn peak_during<R>(f: impl FnOnce() -> R) -> (R, usize) {
    let base = LIVE.load(Ordering::SeqCst);
    PEAK.store(base, Ordering::SeqCst);
    let r = f();
    (r, PEAK.load(Ordering::SeqCst) - base)
}

// Both scenarios live in one test so no other test allocates concurrently.
#[test]
fn fused_kernel_scratch_stays_within_contract() {
    let mut rng = CounterRng::new(21);
    // a: rank 20 (8 MiB), b: rank 6 sharing 3 labels with a.
    let a = Tensor::random(labels(0..20), &mut rng).unwrap();
    let b = Tensor::random(labels([2, 9, 17, 30, 31, 32]), &mut rng).unwrap();
    let out_len = 1usize << (17 + 3);
    let workers = parallel::current_workers();

    for cfg in [
        KernelConfig::default(),
        KernelConfig {
            batch_log2: 10,
            ..Default::default()
        },
        KernelConfig {
            batch_log2: 10,
            resident_log2: 4,
            ..Default::default()
        },
    ] {
        // warm the thread pool outside the measured region
        let _ = contract_fused(&b, &b, &cfg).unwrap();
        let (out, peak) = peak_during(|| contract_fused(&a, &b, &cfg).unwrap());
        let bound = (out_len + b.len() + workers * (1usize << cfg.batch_log2)) * ELEM + SLACK;
        assert!(peak <= bound, "peak {peak} > bound {bound} for {cfg:?}");
        // the reference materializes a permuted copy of a, which the fused kernel must not
        let (reference, naive_peak) = peak_during(|| contract_naive(&a, &b, MAX_RANK).unwrap());
        assert!(naive_peak >= a.len() * ELEM);
        assert!(out.relative_distance(&reference).unwrap() < 1e-6);
    }
}
