//! Shared, in-place element storage for dats and global cells.
//!
//! Storage is reached concurrently from pool workers through raw element
//! pointers. Exclusivity is not enforced here: the dependency graph orders
//! every writer against all other accessors of the same store, and within a
//! task the chunk plan (direct arguments) or the coloring (indirect mutating
//! arguments) keeps concurrent chunks on disjoint elements.

use std::ptr::NonNull;

use crate::scalar::{Scalar, ScalarKind, Values};

pub(crate) struct RawBuf<T> {
    ptr: NonNull<T>,
    len: usize,
}

// SAFETY: RawBuf owns its allocation; cross-thread access is ordered by the
// scheduler as described in the module docs.
unsafe impl<T: Send> Send for RawBuf<T> {}
unsafe impl<T: Sync> Sync for RawBuf<T> {}

impl<T: Scalar> RawBuf<T> {
    fn new(values: Vec<T>) -> Self {
        let len = values.len();
        let boxed = values.into_boxed_slice();
        let ptr = NonNull::new(Box::into_raw(boxed) as *mut T).expect("non-null box");
        RawBuf { ptr, len }
    }

    /// # Safety
    /// No writer may touch `[start, start + out.len())` concurrently.
    #[inline]
    unsafe fn load(&self, start: usize, out: &mut [T]) {
        debug_assert!(start + out.len() <= self.len);
        std::ptr::copy_nonoverlapping(self.ptr.as_ptr().add(start), out.as_mut_ptr(), out.len());
    }

    /// # Safety
    /// The caller must have exclusive access to `[start, start + src.len())`.
    #[inline]
    unsafe fn store(&self, start: usize, src: &[T]) {
        debug_assert!(start + src.len() <= self.len);
        std::ptr::copy_nonoverlapping(src.as_ptr(), self.ptr.as_ptr().add(start), src.len());
    }

    /// # Safety
    /// Same as [`RawBuf::store`].
    #[inline]
    unsafe fn accumulate(&self, start: usize, src: &[T]) {
        debug_assert!(start + src.len() <= self.len);
        let base = self.ptr.as_ptr().add(start);
        for (k, &v) in src.iter().enumerate() {
            let p = base.add(k);
            *p = (*p).accumulate(v);
        }
    }

    /// # Safety
    /// No writer may be active on any element.
    unsafe fn snapshot(&self) -> Vec<T> {
        std::slice::from_raw_parts(self.ptr.as_ptr(), self.len).to_vec()
    }

    fn base(&self) -> *const u8 {
        self.ptr.as_ptr() as *const u8
    }
}

impl<T> Drop for RawBuf<T> {
    fn drop(&mut self) {
        // SAFETY: ptr/len came from Box::into_raw of a boxed slice.
        unsafe {
            drop(Box::from_raw(std::ptr::slice_from_raw_parts_mut(
                self.ptr.as_ptr(),
                self.len,
            )));
        }
    }
}

pub(crate) enum Storage {
    F64(RawBuf<f64>),
    F32(RawBuf<f32>),
    I32(RawBuf<i32>),
}

impl Storage {
    pub(crate) fn new(values: Values) -> Self {
        match values {
            Values::F64(v) => Storage::F64(RawBuf::new(v)),
            Values::F32(v) => Storage::F32(RawBuf::new(v)),
            Values::I32(v) => Storage::I32(RawBuf::new(v)),
        }
    }

    pub(crate) fn kind(&self) -> ScalarKind {
        match self {
            Storage::F64(_) => ScalarKind::F64,
            Storage::F32(_) => ScalarKind::F32,
            Storage::I32(_) => ScalarKind::I32,
        }
    }

    #[cfg(test)]
    pub(crate) fn len(&self) -> usize {
        match self {
            Storage::F64(b) => b.len,
            Storage::F32(b) => b.len,
            Storage::I32(b) => b.len,
        }
    }

    pub(crate) fn base_ptr(&self) -> *const u8 {
        match self {
            Storage::F64(b) => b.base(),
            Storage::F32(b) => b.base(),
            Storage::I32(b) => b.base(),
        }
    }

    /// Copies `buf.len()` values starting at `start` into `buf`.
    ///
    /// # Safety
    /// See [`RawBuf::load`]. Panics if `buf` has a different kind.
    #[inline]
    pub(crate) unsafe fn load(&self, start: usize, buf: &mut ArgBuf) {
        match (self, buf) {
            (Storage::F64(s), ArgBuf::F64(b)) => s.load(start, b),
            (Storage::F32(s), ArgBuf::F32(b)) => s.load(start, b),
            (Storage::I32(s), ArgBuf::I32(b)) => s.load(start, b),
            _ => unreachable!("argument buffer kind validated at submission"),
        }
    }

    /// # Safety
    /// See [`RawBuf::store`].
    #[inline]
    pub(crate) unsafe fn store(&self, start: usize, buf: &ArgBuf) {
        match (self, buf) {
            (Storage::F64(s), ArgBuf::F64(b)) => s.store(start, b),
            (Storage::F32(s), ArgBuf::F32(b)) => s.store(start, b),
            (Storage::I32(s), ArgBuf::I32(b)) => s.store(start, b),
            _ => unreachable!("argument buffer kind validated at submission"),
        }
    }

    /// # Safety
    /// See [`RawBuf::store`].
    #[inline]
    pub(crate) unsafe fn accumulate(&self, start: usize, buf: &ArgBuf) {
        match (self, buf) {
            (Storage::F64(s), ArgBuf::F64(b)) => s.accumulate(start, b),
            (Storage::F32(s), ArgBuf::F32(b)) => s.accumulate(start, b),
            (Storage::I32(s), ArgBuf::I32(b)) => s.accumulate(start, b),
            _ => unreachable!("argument buffer kind validated at submission"),
        }
    }

    /// # Safety
    /// No writer may be active.
    pub(crate) unsafe fn snapshot(&self) -> Values {
        match self {
            Storage::F64(s) => Values::F64(s.snapshot()),
            Storage::F32(s) => Values::F32(s.snapshot()),
            Storage::I32(s) => Values::I32(s.snapshot()),
        }
    }
}

/// Per-argument scratch buffer handed to kernels for one element.
#[derive(Debug, Clone, PartialEq)]
pub enum ArgBuf {
    F64(Vec<f64>),
    F32(Vec<f32>),
    I32(Vec<i32>),
}

impl ArgBuf {
    pub(crate) fn zeros(kind: ScalarKind, dim: usize) -> Self {
        match kind {
            ScalarKind::F64 => ArgBuf::F64(vec![0.0; dim]),
            ScalarKind::F32 => ArgBuf::F32(vec![0.0; dim]),
            ScalarKind::I32 => ArgBuf::I32(vec![0; dim]),
        }
    }

    #[inline]
    pub(crate) fn clear(&mut self) {
        match self {
            ArgBuf::F64(b) => b.fill(0.0),
            ArgBuf::F32(b) => b.fill(0.0),
            ArgBuf::I32(b) => b.fill(0),
        }
    }

    pub fn kind(&self) -> ScalarKind {
        match self {
            ArgBuf::F64(_) => ScalarKind::F64,
            ArgBuf::F32(_) => ScalarKind::F32,
            ArgBuf::I32(_) => ScalarKind::I32,
        }
    }
}
