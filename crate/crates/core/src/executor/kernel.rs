use std::fmt;
use std::sync::Arc;

use crate::storage::ArgBuf;

/// Per-element view of a loop's arguments, in declaration order.
///
/// READ, WRITE and RW arguments arrive holding the current values of the
/// addressed element; INC arguments arrive zeroed and whatever the kernel
/// leaves in them is added to the target afterwards.
pub struct KernelArgs<'a> {
    pub(crate) element: usize,
    pub(crate) bufs: &'a mut [ArgBuf],
}

macro_rules! accessors {
    ($get:ident, $get_mut:ident, $variant:ident, $t:ty) => {
        #[inline]
        pub fn $get(&self, arg: usize) -> &[$t] {
            match &self.bufs[arg] {
                ArgBuf::$variant(b) => b,
                other => panic!(
                    "argument {arg} holds {} values, not {}",
                    other.kind(),
                    stringify!($t)
                ),
            }
        }

        #[inline]
        pub fn $get_mut(&mut self, arg: usize) -> &mut [$t] {
            match &mut self.bufs[arg] {
                ArgBuf::$variant(b) => b,
                other => panic!(
                    "argument {arg} holds {} values, not {}",
                    other.kind(),
                    stringify!($t)
                ),
            }
        }
    };
}

impl<'a> KernelArgs<'a> {
    /// Index of the iterated element.
    pub fn element(&self) -> usize {
        self.element
    }

    pub fn len(&self) -> usize {
        self.bufs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bufs.is_empty()
    }

    accessors!(f64, f64_mut, F64, f64);
    accessors!(f32, f32_mut, F32, f32);
    accessors!(i32, i32_mut, I32, i32);

    /// Copies an f64 argument of known dimension out as an array.
    #[inline]
    pub fn f64_array<const N: usize>(&self, arg: usize) -> [f64; N] {
        let mut out = [0.0; N];
        out.copy_from_slice(self.f64(arg));
        out
    }
}

type KernelFn = dyn Fn(&mut KernelArgs<'_>) + Send + Sync;

/// A user kernel, invoked once per iterated element.
///
/// Kernels must only communicate through their declared arguments.
#[derive(Clone)]
pub struct Kernel(Arc<KernelFn>);

impl Kernel {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&mut KernelArgs<'_>) + Send + Sync + 'static,
    {
        Kernel(Arc::new(f))
    }

    #[inline]
    pub(crate) fn call(&self, args: &mut KernelArgs<'_>) {
        (self.0)(args)
    }
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Kernel(..)")
    }
}
