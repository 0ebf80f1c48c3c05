//! Prefetching iteration over a range of indices.
//!
//! A [`PrefetchContext`] walks `[begin, end)` and, at every multiple of the
//! prefetch distance (counted from `begin`), issues one hint batch per
//! registered container for the window of elements one distance ahead. Hints
//! never change results; they are routed through a [`HintSink`] so tests can
//! count them instead of touching the cache.

use std::marker::PhantomData;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rayon::prelude::*;
use thiserror::Error;

use crate::executor::{plan_chunks, ExecutionPolicy};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrefetchError {
    #[error("prefetch context needs at least one container")]
    EmptyContainers,
    #[error("invalid range: {0}")]
    Range(String),
    #[error("prefetch distance factor must be positive")]
    ZeroDistanceFactor,
}

/// A prefetchable array viewed as `len` elements of `elem_bytes` each.
///
/// A gathered container maps iteration index `i` to element `index[i]`.
#[derive(Debug, Clone, Copy)]
pub struct Container<'a> {
    base: *const u8,
    len: usize,
    elem_bytes: usize,
    index: Option<&'a [u32]>,
    _borrow: PhantomData<&'a [u8]>,
}

// SAFETY: a container is a shared view of immutable-for-the-duration memory;
// only its address is used to issue hints (or a volatile read within bounds).
unsafe impl Send for Container<'_> {}
unsafe impl Sync for Container<'_> {}

impl<'a> Container<'a> {
    /// Views `data` as elements of `dim` consecutive values.
    pub fn from_slice<T>(data: &'a [T], dim: usize) -> Self {
        let dim = dim.max(1);
        Container {
            base: data.as_ptr() as *const u8,
            len: data.len() / dim,
            elem_bytes: std::mem::size_of::<T>() * dim,
            index: None,
            _borrow: PhantomData,
        }
    }

    /// # Safety
    /// `base` must point to `len * elem_bytes` readable bytes that outlive
    /// `'a`, and every entry of `index` must be `< len`.
    pub(crate) unsafe fn from_raw(
        base: *const u8,
        len: usize,
        elem_bytes: usize,
        index: Option<&'a [u32]>,
    ) -> Self {
        Container {
            base,
            len,
            elem_bytes,
            index,
            _borrow: PhantomData,
        }
    }

    /// Number of iteration indices this container covers.
    pub fn coverage(&self) -> usize {
        self.index.map_or(self.len, <[u32]>::len)
    }

    pub fn elem_bytes(&self) -> usize {
        self.elem_bytes
    }

    #[inline]
    fn element_addr(&self, i: usize) -> *const u8 {
        let e = self.index.map_or(i, |ix| ix[i] as usize);
        debug_assert!(e < self.len);
        // in bounds: e < len
        self.base.wrapping_add(e * self.elem_bytes)
    }
}

/// Receives hint batches: container `container` should soon need the
/// elements at iteration indices `[first, last)`.
pub trait HintSink: Sync {
    fn hint(&self, container: usize, view: &Container<'_>, first: usize, last: usize);
}

/// Issues real cache hints: a prefetch instruction where the target has one,
/// a volatile read otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlatformHints {
    pub cache_line_bytes: usize,
}

impl PlatformHints {
    pub fn new(cache_line_bytes: usize) -> Self {
        PlatformHints { cache_line_bytes }
    }
}

impl HintSink for PlatformHints {
    fn hint(&self, _container: usize, view: &Container<'_>, first: usize, last: usize) {
        if view.elem_bytes == 0 {
            return;
        }
        let line = self.cache_line_bytes.max(1);
        match view.index {
            None => {
                let start = view.element_addr(first);
                let bytes = (last - first) * view.elem_bytes;
                let mut off = 0;
                while off < bytes {
                    touch(start.wrapping_add(off));
                    off += line;
                }
            }
            Some(_) => {
                for i in first..last {
                    touch(view.element_addr(i));
                }
            }
        }
    }
}

#[inline(always)]
fn touch(addr: *const u8) {
    #[cfg(target_arch = "x86_64")]
    {
        use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
        // SAFETY: prefetch never faults, whatever the address.
        unsafe { _mm_prefetch(addr as *const i8, _MM_HINT_T0) };
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        // SAFETY: callers only pass addresses inside a live container.
        unsafe {
            std::ptr::read_volatile(addr);
        }
    }
}

/// Counts hint batches per container and tracks the hinted index span.
#[derive(Debug)]
pub struct CountingSink {
    batches: Vec<AtomicU64>,
    min_index: AtomicUsize,
    max_index: AtomicUsize,
}

impl CountingSink {
    pub fn new(containers: usize) -> Self {
        CountingSink {
            batches: (0..containers).map(|_| AtomicU64::new(0)).collect(),
            min_index: AtomicUsize::new(usize::MAX),
            max_index: AtomicUsize::new(0),
        }
    }

    pub fn batches(&self) -> Vec<u64> {
        self.batches.iter().map(|c| c.load(Ordering::Relaxed)).collect()
    }

    pub fn total(&self) -> u64 {
        self.batches().iter().sum()
    }

    /// Smallest and largest iteration index any hint covered.
    pub fn span(&self) -> Option<(usize, usize)> {
        let lo = self.min_index.load(Ordering::Relaxed);
        (lo != usize::MAX).then(|| (lo, self.max_index.load(Ordering::Relaxed)))
    }
}

impl HintSink for CountingSink {
    fn hint(&self, container: usize, _view: &Container<'_>, first: usize, last: usize) {
        self.batches[container].fetch_add(1, Ordering::Relaxed);
        self.min_index.fetch_min(first, Ordering::Relaxed);
        self.max_index.fetch_max(last - 1, Ordering::Relaxed);
    }
}

#[derive(Debug, Clone)]
pub struct PrefetchContext<'a> {
    begin: usize,
    end: usize,
    distance_factor: usize,
    distance: usize,
    containers: Vec<Container<'a>>,
}

/// Builds a context over `[begin, end)` with the default 64-byte cache line.
pub fn make_prefetcher_context<'a>(
    begin: usize,
    end: usize,
    distance_factor: usize,
    containers: Vec<Container<'a>>,
) -> Result<PrefetchContext<'a>, PrefetchError> {
    PrefetchContext::new(begin, end, distance_factor, 64, containers)
}

impl<'a> PrefetchContext<'a> {
    pub fn new(
        begin: usize,
        end: usize,
        distance_factor: usize,
        cache_line_bytes: usize,
        containers: Vec<Container<'a>>,
    ) -> Result<Self, PrefetchError> {
        if containers.is_empty() {
            return Err(PrefetchError::EmptyContainers);
        }
        if distance_factor == 0 {
            return Err(PrefetchError::ZeroDistanceFactor);
        }
        if begin > end {
            return Err(PrefetchError::Range(format!("begin {begin} > end {end}")));
        }
        for (k, c) in containers.iter().enumerate() {
            if c.coverage() < end {
                return Err(PrefetchError::Range(format!(
                    "container {k} covers {} indices, range ends at {end}",
                    c.coverage()
                )));
            }
        }
        let widest = containers.iter().map(|c| c.elem_bytes).max().unwrap_or(1).max(1);
        let per_line = (cache_line_bytes / widest).max(1);
        Ok(PrefetchContext {
            begin,
            end,
            distance_factor,
            distance: distance_factor * per_line,
            containers,
        })
    }

    pub fn begin(&self) -> usize {
        self.begin
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.begin
    }

    pub fn is_empty(&self) -> bool {
        self.begin == self.end
    }

    pub fn distance_factor(&self) -> usize {
        self.distance_factor
    }

    /// Lookahead in elements.
    pub fn prefetch_distance(&self) -> usize {
        self.distance
    }

    pub fn containers(&self) -> &[Container<'a>] {
        &self.containers
    }

    /// Number of hint batches per container over the whole range.
    pub fn expected_batches(&self) -> usize {
        self.len().div_ceil(self.distance)
    }

    /// Hint step for index `i`: at batch points, hints every container for
    /// the window one distance ahead (clamped to the range). Returns whether
    /// a batch was issued.
    #[inline]
    pub fn step<S: HintSink + ?Sized>(&self, i: usize, sink: &S) -> bool {
        if !(i - self.begin).is_multiple_of(self.distance) {
            return false;
        }
        let first = (i + self.distance).min(self.end - 1);
        let last = (first + self.distance).min(self.end);
        for (k, c) in self.containers.iter().enumerate() {
            sink.hint(k, c, first, last);
        }
        true
    }

    /// Ascending iteration over `[lo, hi)` (a slice of the context range)
    /// issuing hints along the way.
    pub fn iter_range<'s, S: HintSink + ?Sized>(
        &'s self,
        lo: usize,
        hi: usize,
        sink: &'s S,
    ) -> impl Iterator<Item = usize> + 's {
        debug_assert!(self.begin <= lo && hi <= self.end);
        (lo..hi).inspect(move |&i| {
            self.step(i, sink);
        })
    }

    pub fn iter<'s, S: HintSink + ?Sized>(&'s self, sink: &'s S) -> impl Iterator<Item = usize> + 's {
        self.iter_range(self.begin, self.end, sink)
    }
}

/// Applies `body` to every index of the context exactly once, issuing hints
/// through the platform sink.
pub fn for_each_prefetched<E, F>(
    ctx: &PrefetchContext<'_>,
    policy: &ExecutionPolicy,
    body: F,
) -> Result<(), E>
where
    E: Send,
    F: Fn(usize) -> Result<(), E> + Sync,
{
    let sink = PlatformHints::new(64);
    for_each_prefetched_with(ctx, policy, &sink, body)
}

/// As [`for_each_prefetched`] with an explicit sink. Under a parallel policy
/// the range is chunked by `policy.chunk` and chunks run on the current rayon
/// pool; within a chunk indices ascend.
pub fn for_each_prefetched_with<E, F, S>(
    ctx: &PrefetchContext<'_>,
    policy: &ExecutionPolicy,
    sink: &S,
    body: F,
) -> Result<(), E>
where
    E: Send,
    F: Fn(usize) -> Result<(), E> + Sync,
    S: HintSink + ?Sized,
{
    if !policy.kind.is_parallel() {
        return ctx.iter(sink).try_for_each(&body);
    }
    let plan = plan_chunks(ctx.len(), &policy.chunk, rayon::current_num_threads(), None);
    plan.blocks.par_iter().try_for_each(|b| {
        let lo = ctx.begin + b.offset;
        ctx.iter_range(lo, lo + b.nelem, sink).try_for_each(&body)
    })
}
