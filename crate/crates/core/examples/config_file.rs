//! Drive the command-line layer in process: a TOML config with a flag
//! overriding one key, then run it.

use rdsvar::cli::{parse_config, run, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let data = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let config = dir.path().join("bootstrap.toml");
    let text = format!(
        "forest = {:?}\nattributes = {:?}\nmethod = \"tree\"\nB = 500\nlevel = 0.9\nseed = 3\n",
        data.join("tiny_forest.csv"),
        data.join("tiny_attributes.csv"),
    );
    std::fs::write(&config, text)?;

    let out = dir.path().to_str().expect("utf-8 path");
    let cfg = parse_config([
        "rdsvar", "bootstrap", "--config", config.to_str().expect("utf-8 path"), "--method", "neighbourhood",
        "--out", out,
    ])?;
    if let RunConfig::Bootstrap(a) = &cfg {
        println!("method {:?} (flag) with B = {:?} (file)", a.method, a.b);
    }
    let output = run(&cfg)?;
    for row in output.json["result"]["estimates"].as_array().into_iter().flatten() {
        println!(
            "{}: estimate {}, se {:.4}, {} interval [{}, {}]",
            row["attribute"], row["point_estimate"], row["se"].as_f64().unwrap_or(f64::NAN),
            row["ci"]["level"], row["ci"]["lo"], row["ci"]["hi"]
        );
    }
    println!("wrote {:?}", output.files);
    Ok(())
}
