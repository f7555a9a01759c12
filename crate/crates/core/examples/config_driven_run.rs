//! Running a command from a TOML configuration, as the `sdde` binary does.

use sddekit::cli::{run, Command, RunSpec};

const CONFIG: &str = r#"
[model]
builtin = "tanh1d"
params = { a = 1.0, sigma = 0.5 }

[noise]
gamma = 1.0
omega_sq = 1.0
k = [1.0]
epsilon = 0.05

[delays]
c = [0.5]

[run]
t_end = 10.0
x0 = [0.5]
seed = 4
n_traj = 3

[output]
save_stride = 100
"#;

fn main() -> sddekit::Result<()> {
    let dir = std::env::temp_dir().join("sddekit-config-example");
    std::fs::create_dir_all(&dir)?;
    let config_path = dir.join("tanh.toml");
    std::fs::write(&config_path, CONFIG)?;
    for mode in ["sdde", "fast", "limit"] {
        let spec = RunSpec {
            command: Command::Simulate,
            config_path: Some(config_path.clone()),
            overrides: vec![format!("run.mode=\"{mode}\"")],
            out_dir: dir.join(mode),
        };
        let files = run(&spec)?;
        println!("{mode}: wrote {} files under {}", files.len(), spec.out_dir.display());
    }
    Ok(())
}
