//! Row-parallel execution of batch kernels.
//!
//! Every batched kernel in this crate is written as a function over a bundle of
//! column slices. [`for_each_chunk`] splits that bundle into contiguous row
//! ranges and runs the kernel on each range, either on the rayon pool or in the
//! calling thread. Kernels never reduce across rows, so the output is the same
//! bit pattern whatever the split.

/// How a batch kernel is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    /// Run every kernel in the calling thread.
    Sequential,
    /// Split rows across the rayon pool. Without the `parallel` feature this
    /// behaves exactly like [`Parallelism::Sequential`].
    #[default]
    Parallel,
}

impl Parallelism {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

/// Rows per task below which a kernel is not split further.
pub const MIN_CHUNK_ROWS: usize = 256;

/// A bundle of equally long columns that can be cut at a row index.
pub trait Rows: Send + Sized {
    fn rows(&self) -> usize;
    fn split_rows(self, mid: usize) -> (Self, Self);
}

impl<T: Sync> Rows for &[T] {
    fn rows(&self) -> usize {
        self.len()
    }
    fn split_rows(self, mid: usize) -> (Self, Self) {
        self.split_at(mid)
    }
}

impl<T: Send> Rows for &mut [T] {
    fn rows(&self) -> usize {
        self.len()
    }
    fn split_rows(self, mid: usize) -> (Self, Self) {
        self.split_at_mut(mid)
    }
}

macro_rules! impl_rows_tuple {
    ($($name:ident),+) => {
        impl<$($name: Rows),+> Rows for ($($name,)+) {
            fn rows(&self) -> usize {
                let ($(ref $name,)+) = *self;
                let lens = [$($name.rows()),+];
                debug_assert!(lens.iter().all(|&l| l == lens[0]), "column length mismatch");
                lens[0]
            }
            fn split_rows(self, mid: usize) -> (Self, Self) {
                let ($($name,)+) = self;
                $(let $name = $name.split_rows(mid);)+
                (($($name.0,)+), ($($name.1,)+))
            }
        }
    };
}

#[allow(non_snake_case)]
mod tuples {
    use super::Rows;
    impl_rows_tuple!(A);
    impl_rows_tuple!(A, B);
    impl_rows_tuple!(A, B, C);
    impl_rows_tuple!(A, B, C, D);
    impl_rows_tuple!(A, B, C, D, E);
    impl_rows_tuple!(A, B, C, D, E, F);
    impl_rows_tuple!(A, B, C, D, E, F, G);
    impl_rows_tuple!(A, B, C, D, E, F, G, H);
    impl_rows_tuple!(A, B, C, D, E, F, G, H, I);
    impl_rows_tuple!(A, B, C, D, E, F, G, H, I, J);
    impl_rows_tuple!(A, B, C, D, E, F, G, H, I, J, K);
    impl_rows_tuple!(A, B, C, D, E, F, G, H, I, J, K, L);
}

/// Runs `kernel` over contiguous row ranges of `data`.
///
/// The kernel receives the sub-bundle and the global index of its first row.
pub fn for_each_chunk<R, F>(par: Parallelism, data: R, kernel: &F)
where
    R: Rows,
    F: Fn(R, usize) + Sync,
{
    if par.is_parallel() {
        split_recursive(data, 0, kernel);
    } else {
        kernel(data, 0);
    }
}

#[cfg(feature = "parallel")]
fn split_recursive<R, F>(data: R, offset: usize, kernel: &F)
where
    R: Rows,
    F: Fn(R, usize) + Sync,
{
    let n = data.rows();
    if n <= MIN_CHUNK_ROWS {
        kernel(data, offset);
        return;
    }
    let mid = n / 2;
    let (lo, hi) = data.split_rows(mid);
    rayon::join(
        || split_recursive(lo, offset, kernel),
        || split_recursive(hi, offset + mid, kernel),
    );
}

#[cfg(not(feature = "parallel"))]
fn split_recursive<R, F>(data: R, offset: usize, kernel: &F)
where
    R: Rows,
    F: Fn(R, usize) + Sync,
{
    kernel(data, offset);
}

/// Maps every index in `0..n` through `f`, preserving order.
pub fn map_collect<T, F>(par: Parallelism, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().with_min_len(64).map(f).collect();
    }
    let _ = par;
    (0..n).map(f).collect()
}

/// Runs `f` on each element of `items`, in parallel when allowed.
pub fn for_each_mut<T, F>(par: Parallelism, items: &mut [T], f: F)
where
    T: Send,
    F: Fn(&mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        use rayon::prelude::*;
        items.par_iter_mut().for_each(f);
        return;
    }
    let _ = par;
    items.iter_mut().for_each(f);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_every_row_once() {
        for par in [Parallelism::Sequential, Parallelism::Parallel] {
            let src: Vec<u64> = (0..5000).collect();
            let mut dst = vec![0u64; 5000];
            for_each_chunk(par, (&src[..], &mut dst[..]), &|(s, d): (&[u64], &mut [u64]), off| {
                for i in 0..s.len() {
                    d[i] = s[i] * 2 + (off + i) as u64;
                }
            });
            assert!(dst.iter().enumerate().all(|(i, &v)| v == 3 * i as u64));
        }
    }

    #[test]
    fn map_collect_preserves_order() {
        let v = map_collect(Parallelism::Parallel, 1000, |i| i * i);
        assert_eq!(v[999], 999 * 999);
        assert_eq!(v.len(), 1000);
    }
}
