//! Golden matrices of the built-in models at small sizes, plus the signed
//! Hofstadter Chern number. Set `BDG_BLESS=1` to rewrite the files.

use std::fs;
use std::path::PathBuf;

use bosonic_bdg::bdg::{Boundary, MatrixJson};
use bosonic_bdg::linalg::max_abs;
use bosonic_bdg::models::{atomic_limit, chern_insulator, hofstadter, kagome_driven, ssh_chain, LatticeModel};
use bosonic_bdg::topology::chern_band;
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
struct Golden {
    model: String,
    mu: f64,
    h: MatrixJson,
    bdg: MatrixJson,
}

fn path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.json"))
}

fn bless() -> bool {
    std::env::var_os("BDG_BLESS").is_some()
}

fn check(file: &str, model: LatticeModel, mu: f64) {
    let h = model.h_matrix();
    let bdg = model.bdg(mu).unwrap();
    let current = Golden {
        model: model.name.clone(),
        mu,
        h: MatrixJson::from_matrix(&h, &model.dims, model.orbitals, &model.bc),
        bdg: MatrixJson::from_matrix(bdg.matrix(), &model.dims, model.orbitals, &model.bc),
    };
    if bless() {
        fs::write(path(file), serde_json::to_string_pretty(&current).unwrap() + "\n").unwrap();
        return;
    }
    let stored: Golden = serde_json::from_str(&fs::read_to_string(path(file)).unwrap()).unwrap();
    assert_eq!(stored.model, current.model);
    assert_eq!((&stored.h.dims, stored.h.orbitals, &stored.h.bc), (&current.h.dims, current.h.orbitals, &current.h.bc));
    assert_eq!(stored.mu, mu);
    assert!(max_abs(&(stored.h.to_matrix().unwrap() - &h)) < 1e-14, "{file}: h differs");
    assert!(max_abs(&(stored.bdg.to_matrix().unwrap() - bdg.matrix())) < 1e-14, "{file}: H differs");
}

#[test]
fn ssh_golden() {
    check("ssh", ssh_chain(0.5, 1.0, 3, Boundary::Open).unwrap(), 0.0);
}

#[test]
fn kagome_golden() {
    check("kagome", kagome_driven(0.2, -6.0, [2, 2], [Boundary::Periodic; 2]).unwrap(), -6.0);
}

#[test]
fn hofstadter_golden() {
    check("hofstadter", hofstadter(1, 4, [4, 2], [Boundary::Periodic; 2]).unwrap(), -5.0);
}

#[test]
fn chern_insulator_golden() {
    check("chern_insulator", chern_insulator(-1.0, [2, 2], [Boundary::Open, Boundary::Periodic]).unwrap(), -4.0);
}

#[test]
fn atomic_golden() {
    check("atomic", atomic_limit(&[0.5, 1.5], vec![2], vec![Boundary::Periodic]).unwrap(), 0.0);
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct ChernGolden {
    p: i64,
    q: usize,
    band: i32,
    k_grid: usize,
    chern: i64,
}

/// With no pairing and μ below the spectrum, the lowest positive BdG band
/// is the lowest magnetic subband of `h`.
#[test]
fn hofstadter_lowest_subband_chern() {
    let model = hofstadter(1, 4, [4, 1], [Boundary::Periodic; 2]).unwrap();
    let c = chern_band(&model, -5.0, 1, (60, 60)).unwrap();
    assert!(c.deviation < 1e-6, "{c:?}");
    assert_eq!(c.rounded.abs(), 1);
    let current = ChernGolden { p: 1, q: 4, band: 1, k_grid: 60, chern: c.rounded };
    if bless() {
        fs::write(path("hofstadter_chern"), serde_json::to_string_pretty(&current).unwrap() + "\n").unwrap();
        return;
    }
    let stored: ChernGolden = serde_json::from_str(&fs::read_to_string(path("hofstadter_chern")).unwrap()).unwrap();
    assert_eq!(stored, current);
}
