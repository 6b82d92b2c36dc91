/// Range add, point query over `0..n`.
#[derive(Debug, Clone)]
pub struct Fenwick {
    t: Vec<i64>,
}

impl Fenwick {
    pub fn new(n: usize) -> Self {
        Fenwick { t: vec![0; n + 1] }
    }

    fn add_suffix(&mut self, i: usize, v: i64) {
        let mut i = i + 1;
        while i < self.t.len() {
            self.t[i] += v;
            i += i & i.wrapping_neg();
        }
    }

    /// Adds `v` to every index in `lo..=hi`.
    pub fn add(&mut self, lo: usize, hi: usize, v: i64) {
        if lo > hi {
            return;
        }
        self.add_suffix(lo, v);
        if hi + 1 < self.t.len() - 1 {
            self.add_suffix(hi + 1, -v);
        }
    }

    pub fn get(&self, i: usize) -> i64 {
        let mut i = i + 1;
        let mut s = 0;
        while i > 0 {
            s += self.t[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive() {
        let mut f = Fenwick::new(10);
        let mut naive = [0i64; 10];
        for (lo, hi, v) in [(0, 9, 1), (3, 5, -2), (9, 9, 4), (0, 0, 7), (6, 2, 100)] {
            f.add(lo, hi, v);
            for (i, x) in naive.iter_mut().enumerate() {
                if lo <= i && i <= hi {
                    *x += v;
                }
            }
        }
        for (i, &x) in naive.iter().enumerate() {
            assert_eq!(f.get(i), x);
        }
    }
}
