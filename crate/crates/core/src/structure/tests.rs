use nalgebra::{dmatrix, DMatrix};

use super::*;
use crate::chebmat::{fit, Interval};

fn unit() -> Interval {
    Interval::unit()
}

fn sig(ells: &[usize]) -> BlockSignature {
    BlockSignature::new(ells.to_vec()).unwrap()
}

// rank of J_k^p is max(k - p, 0); summed over the blocks
fn jordan_power_ranks(orders: &[usize]) -> Vec<usize> {
    let top = *orders.iter().max().unwrap();
    (1..=top)
        .map(|p| orders.iter().map(|&k| k.saturating_sub(p)).sum())
        .collect()
}

fn brute_ranks(n: &DMatrix<f64>) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = n.clone();
    loop {
        let r = p.rank(1e-9);
        out.push(r);
        if r == 0 {
            return out;
        }
        p = &p * n;
    }
}

/// All signatures with `mu >= 2` and `m <= max_m`, nonincreasing sizes.
fn column_signatures(max_m: usize) -> Vec<Vec<usize>> {
    fn rec(rem: usize, cap: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() >= 2 {
            out.push(cur.clone());
        }
        for l in 1..=cap.min(rem) {
            cur.push(l);
            rec(rem - l, l, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(max_m, max_m, &mut Vec::new(), &mut out);
    out
}

const FIG1_ORDERS: [usize; 8] = [5, 5, 4, 4, 3, 2, 2, 1];
const FIG5: [usize; 5] = [8, 7, 5, 4, 2];

#[test]
fn signature_validation() {
    assert!(BlockSignature::new(vec![3]).is_err());
    assert!(BlockSignature::new(vec![2, 0]).is_err());
    assert!(BlockSignature::for_variant(vec![1, 2], Variant::Columns).is_err());
    assert!(BlockSignature::for_variant(vec![2, 1], Variant::Rows).is_err());
    let s = sig(&FIG5);
    assert_eq!((s.mu(), s.m()), (5, 26));
    assert_eq!(s.offsets(), vec![0, 8, 15, 20, 24]);
}

#[test]
fn elementary_col_examples() {
    assert_eq!(
        elementary_col(&sig(&[1, 1])).unwrap(),
        dmatrix![0.0, 1.0; 0.0, 0.0]
    );
    let n = elementary_col(&sig(&[2, 1])).unwrap();
    let mut want = DMatrix::zeros(3, 3);
    want[(0, 2)] = 1.0;
    assert_eq!(n, want);
    let n = elementary_col(&sig(&FIG5)).unwrap();
    assert_eq!(n.rank(1e-9), 18);
    assert!(elementary_col(&sig(&[1, 2])).is_err());
}

#[test]
fn elementary_row_examples() {
    assert_eq!(
        elementary_row(&sig(&[1, 1])).unwrap(),
        dmatrix![0.0, 1.0; 0.0, 0.0]
    );
    let n = elementary_row(&sig(&[1, 2])).unwrap();
    let mut want = DMatrix::zeros(3, 3);
    want[(0, 2)] = 1.0;
    assert_eq!(n, want);
    assert_eq!(
        elementary_row(&sig(&[2, 4, 5, 7, 8])).unwrap().rank(1e-9),
        18
    );
    assert!(elementary_row(&sig(&[2, 1])).is_err());
}

#[test]
fn characteristics_of_jordan_matrix() {
    let j = jordan_matrix(&FIG1_ORDERS);
    assert_eq!(j.nrows(), 26);
    assert_eq!(rank_profile(&j).unwrap(), vec![18, 11, 6, 2, 0]);
    assert_eq!(rank_profile(&j).unwrap(), jordan_power_ranks(&FIG1_ORDERS));
    let c = characteristics_from_nilpotent(&j, 18, 0).unwrap();
    assert_eq!(c.thetas(), &[7, 5, 4, 2]);
    assert_eq!((c.m(), c.r(), c.mu(), c.d()), (26, 18, 5, 0));
}

#[test]
fn characteristics_of_zero_is_index_one() {
    let c = characteristics_from_nilpotent(&DMatrix::zeros(3, 3), 0, 0).unwrap();
    assert_eq!(c.mu(), 1);
    assert!(c.thetas().is_empty());
    assert_eq!(jordan_blocks(&c).unwrap(), BTreeMap::from([(1, 3)]));
}

#[test]
fn characteristics_of_elementary_col_fig5() {
    let n = elementary_col(&sig(&FIG5)).unwrap();
    assert_eq!(brute_ranks(&n), vec![18, 11, 6, 2, 0]);
    let c = characteristics_from_nilpotent(&n, 18, 0).unwrap();
    assert_eq!(c.thetas(), &[7, 5, 4, 2]);
}

#[test]
fn characteristics_errors() {
    let n = dmatrix![1.0, 0.0; 0.0, 0.0];
    assert!(matches!(
        characteristics_from_nilpotent(&n, 1, 0),
        Err(Error::NotNilpotent)
    ));
    let j = jordan_matrix(&[2]);
    assert!(characteristics_from_nilpotent(&j, 2, 0).is_err());
    assert!(Characteristics::new(3, 3, vec![]).is_err());
    assert!(Characteristics::new(5, 3, vec![1, 2]).is_err());
    assert!(Characteristics::new(5, 1, vec![2]).is_err());
}

#[test]
fn characteristics_with_dynamic_part() {
    let c = characteristics_from_nilpotent(&jordan_matrix(&[3, 1]), 3 + 2, 3).unwrap();
    assert_eq!((c.m(), c.r(), c.d(), c.mu()), (7, 5, 3, 3));
    assert_eq!(c.thetas(), &[1, 1]);
}

#[test]
fn signature_from_fig1_characteristics() {
    let c = Characteristics::new(26, 18, vec![7, 5, 4, 2]).unwrap();
    let col = signature_from_characteristics(&c, 26, Variant::Columns).unwrap();
    assert_eq!(col.ells(), &FIG5);
    let row = signature_from_characteristics(&c, 26, Variant::Rows).unwrap();
    assert_eq!(row.ells(), &[2, 4, 5, 7, 8]);
    let c = Characteristics::new(2, 1, vec![1]).unwrap();
    assert_eq!(
        signature_from_characteristics(&c, 2, Variant::Columns)
            .unwrap()
            .ells(),
        &[1, 1]
    );
    assert!(signature_from_characteristics(&c, 3, Variant::Columns).is_err());
}

#[test]
fn jordan_blocks_fig1() {
    let c = Characteristics::new(26, 18, vec![7, 5, 4, 2]).unwrap();
    let b = jordan_blocks(&c).unwrap();
    assert_eq!(b, BTreeMap::from([(1, 1), (2, 2), (3, 1), (4, 2), (5, 2)]));
    assert_eq!(b.iter().map(|(o, c)| o * c).sum::<usize>(), 26);
    assert_eq!(b.values().sum::<usize>(), 8);
    let c = Characteristics::new(2, 1, vec![1]).unwrap();
    assert_eq!(jordan_blocks(&c).unwrap(), BTreeMap::from([(2, 1)]));
}

#[test]
fn jordan_blocks_rejects_negative_counts() {
    // m - r - theta_0 < 0
    let c = Characteristics::new(4, 3, vec![2]).unwrap();
    assert!(jordan_blocks(&c).is_err());
}

#[test]
fn jordan_permutation_examples() {
    assert_eq!(
        jordan_permutation(&sig(&[1, 1]), Variant::Columns).unwrap(),
        vec![0, 1]
    );
    let s = sig(&[2, 1]);
    let pi = jordan_permutation(&s, Variant::Columns).unwrap();
    assert_eq!(pi, vec![0, 2, 1]);
    let p = permutation_matrix(&pi);
    let j = &p * elementary_col(&s).unwrap() * p.transpose();
    assert_eq!(j, jordan_matrix(&[2, 1]));
}

fn assert_jordan(sig: &BlockSignature, variant: Variant) {
    let n = elementary(sig, variant).unwrap();
    let p = permutation_matrix(&jordan_permutation(sig, variant).unwrap());
    let j = &p * &n * p.transpose();
    let c = characteristics_from_nilpotent(&n, n.rank(1e-9), 0).unwrap();
    let mut orders: Vec<usize> = jordan_blocks(&c)
        .unwrap()
        .iter()
        .flat_map(|(&o, &k)| std::iter::repeat_n(o, k))
        .collect();
    orders.sort_by(|a, b| b.cmp(a));
    assert_eq!(j, jordan_matrix(&orders), "{sig} {variant}");
    assert_eq!(brute_ranks(&j), brute_ranks(&n));
    assert_eq!(brute_ranks(&n), jordan_power_ranks(&orders));
}

#[test]
fn jordan_permutation_fig5_and_fig9() {
    assert_jordan(&sig(&FIG5), Variant::Columns);
    assert_jordan(&sig(&[2, 4, 5, 7, 8]), Variant::Rows);
    let n = elementary_col(&sig(&FIG5)).unwrap();
    let p = permutation_matrix(&jordan_permutation(&sig(&FIG5), Variant::Columns).unwrap());
    assert_eq!(
        brute_ranks(&(&p * n * p.transpose())),
        vec![18, 11, 6, 2, 0]
    );
}

#[test]
fn exhaustive_small_signatures() {
    let all = column_signatures(12);
    // partitions of 2..=12 with at least two parts
    assert_eq!(all.len(), 259);
    for ells in all {
        let col = sig(&ells);
        let row = col.reversed();
        for (s, v) in [(&col, Variant::Columns), (&row, Variant::Rows)] {
            assert_jordan(s, v);
            let n = elementary(s, v).unwrap();
            let c = characteristics_from_nilpotent(&n, n.rank(1e-9), 0).unwrap();
            assert_eq!(c.mu(), s.mu());
            assert_eq!(&signature_from_characteristics(&c, s.m(), v).unwrap(), s);
        }
    }
}

#[test]
fn sut_predicates() {
    let s = sig(&[2, 1]);
    let z = MatrixFunction::zeros(3, 3, unit());
    assert!(is_sut(&z, &s, 1e-12).unwrap());
    let e = MatrixFunction::constant(elementary_col(&s).unwrap(), unit());
    assert!(is_sut(&e, &s, 1e-12).unwrap());
    assert!(is_sut_columns(&e, &s, 1e-8).unwrap());
    let mut d = elementary_col(&s).unwrap();
    d[(1, 1)] = 0.5;
    assert!(!is_sut(&MatrixFunction::constant(d, unit()), &s, 1e-12).unwrap());

    let good = fit(unit(), 1e-12, |t| {
        let mut n = DMatrix::zeros(3, 3);
        n[(0, 2)] = 2.0 + t;
        n
    })
    .unwrap();
    assert!(is_sut_columns(&good, &s, 1e-8).unwrap());
    assert!((min_secondary_singular(&good, &s, Variant::Columns, 65).unwrap() - 1.0).abs() < 1e-12);
    let bad = fit(unit(), 1e-12, |t| {
        let mut n = DMatrix::zeros(3, 3);
        n[(0, 2)] = t;
        n
    })
    .unwrap();
    assert!(!is_sut_columns(&bad, &s, 1e-8).unwrap());
    assert!(SutMatrixFunction::new(bad, s.clone(), Variant::Columns, 1e-8).is_err());
    assert!(is_sut_rows(&good, &s, 1e-8).is_err());
    assert!(is_sut(&z, &sig(&[1, 1]), 1e-8).is_err());
}

#[test]
fn json_shapes() {
    let s = sig(&FIG5);
    let j = serde_json::to_value(&s).unwrap();
    assert_eq!(j, serde_json::json!({"mu": 5, "ells": [8, 7, 5, 4, 2]}));
    assert_eq!(serde_json::from_value::<BlockSignature>(j).unwrap(), s);
    assert!(serde_json::from_str::<BlockSignature>(r#"{"mu":3,"ells":[1,1]}"#).is_err());

    let c = Characteristics::new(26, 18, vec![7, 5, 4, 2]).unwrap();
    let j = serde_json::to_value(&c).unwrap();
    assert_eq!(
        j,
        serde_json::json!({"m": 26, "r": 18, "mu": 5, "thetas": [7, 5, 4, 2], "d": 0})
    );
    assert_eq!(serde_json::from_value::<Characteristics>(j).unwrap(), c);
    assert!(serde_json::from_str::<Characteristics>(
        r#"{"m":26,"r":18,"mu":5,"thetas":[7,5,4,2],"d":1}"#
    )
    .is_err());
    assert_eq!("col".parse::<Variant>().unwrap(), Variant::Columns);
    assert_eq!(serde_json::to_string(&Variant::Rows).unwrap(), "\"rows\"");
}
