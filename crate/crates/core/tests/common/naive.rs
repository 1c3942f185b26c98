//! Index-loop reference implementations of the bound formulas, written directly in terms of
//! `S` with nested sums and no shared code with the library.
#![allow(dead_code, clippy::needless_range_loop)]

pub type Dense = Vec<Vec<f64>>;

pub struct Consts {
    pub omega: f64,
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
    pub c2nd: f64,
    pub c_sigma: f64,
}

pub fn s_matrix(a: &Dense, c: &Consts) -> Dense {
    let n = a.len();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut x = c.c2 * a[i][j];
            if i == j {
                let mut row = 0.0;
                for l in 0..n {
                    row += a[i][l];
                }
                x += c.omega / c.w + c.c1 * row;
            }
            s[i][j] = x;
        }
    }
    s
}

pub fn mul(x: &Dense, y: &Dense) -> Dense {
    let n = x.len();
    let p = y[0].len();
    let mut out = vec![vec![0.0; p]; n];
    for i in 0..n {
        for j in 0..p {
            let mut acc = 0.0;
            for l in 0..y.len() {
                acc += x[i][l] * y[l][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

pub fn power(s: &Dense, k: usize) -> Dense {
    let n = s.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        out[i][i] = 1.0;
    }
    for _ in 0..k {
        out = mul(&out, s);
    }
    out
}

/// `(1ᵀ X)_j`
fn col_sum(x: &Dense, j: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.len() {
        acc += x[i][j];
    }
    acc
}

pub fn q_matrix(a: &Dense, c: &Consts, m: usize, k: usize) -> Dense {
    let n = a.len();
    let s = s_matrix(a, c);
    let sl = power(&s, m - k - 1);
    let sk = power(&s, k);
    let mut q = vec![vec![0.0; n]; n];
    for v in 0..n {
        for u in 0..n {
            let mut total = 0.0;
            // P_k and its transpose
            for j in 0..n {
                let weight = col_sum(&sk, j);
                let mut a_sl_u = 0.0;
                let mut a_sl_v = 0.0;
                for i in 0..n {
                    a_sl_u += a[j][i] * sl[i][u];
                    a_sl_v += a[j][i] * sl[i][v];
                }
                total += sl[j][v] * weight * a_sl_u;
                total += sl[j][u] * weight * a_sl_v;
            }
            // (S^l)ᵀ diag(1ᵀ S^k (diag(A1) + A)) S^l
            for j in 0..n {
                let mut e = 0.0;
                for i in 0..n {
                    let mut b_ij = a[i][j];
                    if i == j {
                        for l in 0..n {
                            b_ij += a[i][l];
                        }
                    }
                    e += col_sum(&sk, i) * b_ij;
                }
                total += sl[j][v] * e * sl[j][u];
            }
            q[v][u] = total;
        }
    }
    q
}

pub fn mixing_total(a: &Dense, c: &Consts, m: usize, v: usize, u: usize) -> f64 {
    let n = a.len();
    let s = s_matrix(a, c);
    let mut total = 0.0;
    for k in 0..m {
        let smk = power(&s, m - k);
        let sk = power(&s, k);
        let mut first = 0.0;
        for j in 0..n {
            first += smk[j][v] * col_sum(&sk, j) * smk[j][u];
        }
        let q = if c.c2nd == 0.0 {
            0.0
        } else {
            q_matrix(a, c, m, k)[v][u]
        };
        let coef = (c.c_sigma * c.w).powi((2 * m - k - 1) as i32);
        total += coef * (c.w * first + c.c2nd * q);
    }
    total
}

/// Per-node Hessian bound at node `i`.
pub fn node_denominator(a: &Dense, c: &Consts, m: usize, i: usize, v: usize, u: usize) -> f64 {
    let n = a.len();
    let s = s_matrix(a, c);
    let cw = c.c_sigma * c.w;
    let mut total = 0.0;
    for k in 0..m {
        let smk = power(&s, m - k);
        let sk = power(&s, k);
        for j in 0..n {
            total += cw.powi((2 * m - k - 1) as i32) * c.w * smk[j][v] * sk[i][j] * smk[j][u];
        }
    }
    for l in 0..m {
        let sl = power(&s, l);
        let asl = mul(a, &sl);
        let outer = power(&s, m - 1 - l);
        for x in 0..n {
            let mut p = sl[x][v] * asl[x][u] + sl[x][u] * asl[x][v];
            for j in 0..n {
                let mut b = a[x][j];
                if x == j {
                    for t in 0..n {
                        b += a[x][t];
                    }
                }
                p += sl[j][v] * b * sl[j][u];
            }
            total += c.c2nd * cw.powi((m + l) as i32) * outer[i][x] * p;
        }
    }
    total
}
