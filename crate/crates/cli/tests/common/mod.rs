#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use embed_infolab::synth;
use embed_infolab::tensor_io::{self, TensorFile, TokenSidecar};
use nalgebra::DMatrix;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_embed-infolab"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) {
    tensor_io::write_tensor(path, &TensorFile::from_matrix(m)).unwrap();
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn arg(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }
}

/// Token matrix, attention, values, sidecar and a directory of sentences.
pub fn fixture(seed: u64) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = synth::rng(seed);
    let (n, d) = (8, 16);

    write_matrix(&dir.path().join("z.emb1"), &synth::unit_rows(&mut rng, 12, d));

    let heads: Vec<DMatrix<f64>> = (0..2).map(|_| synth::causal_attention(&mut rng, n, 0.1)).collect();
    let mut data = Vec::new();
    for h in &heads {
        for i in 0..n {
            for j in 0..n {
                data.push(h[(i, j)]);
            }
        }
    }
    let att = TensorFile::new(tensor_io::DType::F64, vec![2, n, n], data).unwrap();
    tensor_io::write_tensor(dir.path().join("att.emb1"), &att).unwrap();
    let avg = (&heads[0] + &heads[1]) * 0.5;
    let values = synth::gaussian_matrix(&mut rng, n, d);
    write_matrix(&dir.path().join("values.emb1"), &values);
    write_matrix(&dir.path().join("reps.emb1"), &(&avg * &values));
    let tokens: Vec<String> = ["The", " capital", " of", " France", " is", " Paris", ".", " Yes"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    tensor_io::write_sidecar(dir.path().join("tokens.json"), &TokenSidecar::new(tokens)).unwrap();

    let sent = dir.path().join("sentences");
    std::fs::create_dir(&sent).unwrap();
    for (i, name) in ["a_king", "a_queen", "b_king", "b_queen"].iter().enumerate() {
        let m = synth::gaussian_matrix(&mut rng, 5 + i, 6);
        write_matrix(&sent.join(format!("{name}.emb1")), &m);
    }
    Fixture { dir }
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}
