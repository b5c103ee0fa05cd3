//! Regenerates the procedural fixture meshes and the arm description.
//!
//! ```text
//! cargo run -p linksdf --example make_fixtures -- fixtures
//! ```

use std::path::{Path, PathBuf};

use linksdf::mesh::{primitives, TriMesh};
use linksdf::robot::RobotModel;
use nalgebra::Vector3;

fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
    Vector3::new(x, y, z)
}

/// Link geometry in each link frame; tubes roughly follow the real arm.
fn arm_meshes() -> Vec<(&'static str, TriMesh)> {
    let seg = 24;
    vec![
        ("link0", primitives::tube(&[v(0.0, 0.0, 0.04), v(0.0, 0.0, 0.2)], 0.08, 0.0, seg)),
        ("link1", primitives::tube(&[v(0.0, 0.0, -0.2), v(0.0, 0.0, 0.0)], 0.065, 0.0, seg)),
        ("link2", primitives::tube(&[v(0.0, 0.0, 0.0), v(0.0, -0.2, 0.0)], 0.065, 0.0, seg)),
        (
            "link3",
            primitives::tube(&[v(0.0, 0.0, -0.15), v(0.0, 0.0, 0.0), v(0.0825, 0.0, 0.0)], 0.06, 0.04, seg),
        ),
        (
            "link4",
            primitives::tube(&[v(0.0, 0.0, 0.0), v(-0.0825, 0.0, 0.0), v(-0.0825, 0.12, 0.0)], 0.06, 0.04, seg),
        ),
        ("link5", primitives::tube(&[v(0.0, 0.0, -0.26), v(0.0, 0.0, 0.0)], 0.055, 0.0, seg)),
        (
            "link6",
            primitives::tube(&[v(0.0, 0.0, -0.04), v(0.0, 0.0, 0.0), v(0.088, 0.0, 0.0)], 0.05, 0.03, seg),
        ),
        ("link7", primitives::tube(&[v(0.0, 0.0, -0.04), v(0.0, 0.0, 0.08)], 0.05, 0.0, seg)),
        // a rounded bar across the flange; vertex normals of a box would leave
        // its edge and corner regions without samples
        ("hand", primitives::tube(&[v(0.0, -0.08, 0.035), v(0.0, 0.08, 0.035)], 0.035, 0.0, seg)),
    ]
}

const ROBOT_HEAD: &str = r#"format = "linksdf-robot"
version = 1
name = "panda_like"
# timing limits are 0.1 of the nominal joint rates
timing_limit_scale = 0.1
"#;

const FRAC_PI_2: &str = "1.5707963267948966";

fn joint(origin_xyz: [f64; 3], rpy_x: i32, lo: f64, hi: f64, vel: f64, acc: f64) -> String {
    let rx = match rpy_x {
        0 => "0.0".to_string(),
        1 => FRAC_PI_2.to_string(),
        _ => format!("-{FRAC_PI_2}"),
    };
    format!(
        "joint = {{ kind = \"revolute\", axis = [0.0, 0.0, 1.0], origin = {{ xyz = [{:?}, {:?}, {:?}], rpy = [{rx}, 0.0, 0.0] }}, limits = [{lo:?}, {hi:?}], vel_limit = {vel:?}, acc_limit = {acc:?} }}\n",
        origin_xyz[0], origin_xyz[1], origin_xyz[2]
    )
}

fn robot_toml() -> String {
    let mut s = ROBOT_HEAD.to_string();
    let link = |s: &mut String, name: &str, joint: String| {
        s.push_str(&format!("\n[[links]]\nname = \"{name}\"\nmesh = \"meshes/{name}.obj\"\n{joint}"));
    };
    link(&mut s, "link0", "joint = { kind = \"fixed\" }\n".into());
    link(&mut s, "link1", joint([0.0, 0.0, 0.333], 0, -2.8973, 2.8973, 2.175, 15.0));
    link(&mut s, "link2", joint([0.0, 0.0, 0.0], -1, -1.7628, 1.7628, 2.175, 7.5));
    link(&mut s, "link3", joint([0.0, -0.316, 0.0], 1, -2.8973, 2.8973, 2.175, 10.0));
    link(&mut s, "link4", joint([0.0825, 0.0, 0.0], 1, -3.0718, -0.0698, 2.175, 12.5));
    link(&mut s, "link5", joint([-0.0825, 0.384, 0.0], -1, -2.8973, 2.8973, 2.61, 15.0));
    link(&mut s, "link6", joint([0.0, 0.0, 0.0], 1, -0.0175, 3.7525, 2.61, 20.0));
    link(&mut s, "link7", joint([0.088, 0.0, 0.0], 1, -2.8973, 2.8973, 2.61, 20.0));
    link(
        &mut s,
        "hand",
        "joint = { kind = \"fixed\", origin = { xyz = [0.0, 0.0, 0.107] } }\n".into(),
    );
    s
}

fn write(path: &Path, text: &str) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, text).unwrap();
    println!("wrote {}", path.display());
}

fn main() {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    let robot_dir = root.join("robot");
    for (name, mesh) in arm_meshes() {
        assert!(mesh.is_watertight(), "{name} is not watertight");
        write(&robot_dir.join("meshes").join(format!("{name}.obj")), &mesh.to_obj_string());
    }
    let robot_path = robot_dir.join("panda_like.toml");
    write(&robot_path, &robot_toml());
    let model = RobotModel::load(&robot_path).expect("robot parses");
    println!("{} links, {} dof", model.n_links(), model.n_dof());

    write(
        &root.join("meshes").join("sphere.obj"),
        &primitives::icosphere(0.1, 3).to_obj_string(),
    );
}
