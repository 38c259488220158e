use std::fs::File;

use curveforge::io::{load_grid, load_spacetime, write_grid_binary, write_grid_csv, write_spacetime_binary, write_spacetime_csv};
use curveforge::{Error, GridField, SpaceTimeField, TorusGrid};

fn sample() -> SpaceTimeField {
    let g = TorusGrid::new(2, 8).unwrap();
    SpaceTimeField::from_fn(g, vec![0.0, 0.25, 0.5], |x, t| (x[0] + 2.0 * x[1]).sin() * (1.0 + t)).unwrap()
}

#[test]
fn files_load_by_extension() {
    let dir = tempfile::tempdir().unwrap();
    let u = sample();
    let f = u.node(1).clone();
    let csv = dir.path().join("u.csv");
    let bin = dir.path().join("u.bin");
    write_spacetime_csv(&u, File::create(&csv).unwrap()).unwrap();
    write_spacetime_binary(&u, File::create(&bin).unwrap()).unwrap();
    for path in [&csv, &bin] {
        let back = load_spacetime(path).unwrap();
        assert_eq!(back.times(), u.times());
        assert!(back.sub(&u).unwrap().max_abs() <= 1e-15);
    }
    let gcsv = dir.path().join("f.csv");
    let gbin = dir.path().join("f.bin");
    write_grid_csv(&f, File::create(&gcsv).unwrap()).unwrap();
    write_grid_binary(&f, File::create(&gbin).unwrap()).unwrap();
    for path in [&gcsv, &gbin] {
        let back: GridField = load_grid(path).unwrap();
        assert!(back.sub(&f).unwrap().max_abs() <= 1e-15);
    }
}

#[test]
fn binary_kind_mismatch_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("u.bin");
    write_spacetime_binary(&sample(), File::create(&bin).unwrap()).unwrap();
    assert!(matches!(load_grid(&bin), Err(Error::Parse(_))));
    assert!(matches!(load_spacetime(&dir.path().join("missing.csv")), Err(Error::Io(_))));
}
