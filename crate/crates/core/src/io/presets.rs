//! Named experiment presets: canned configs for the accuracy tables, the
//! energy-decay and coarsening runs, the stabilized step-size sweep, the
//! adaptive demonstration, and the copolymer morphology studies. Every
//! preset is an ordinary config text, so any field can be overridden.

use crate::io::config::SchemeName;

/// What the CLI ultimately executes for a config.
#[derive(Clone, Debug, PartialEq)]
pub enum Job {
    /// Convergence study over `dt_list`, one table per scheme.
    Accuracy { schemes: Vec<SchemeName> },
    /// March one run (fixed or adaptive per the config timing).
    Simulate,
    /// One fixed-step run per `dt_list` entry, shared initial data.
    StabSweep,
}

pub struct Preset {
    pub name: &'static str,
    pub config: String,
    pub job: Job,
}

pub const PRESET_NAMES: [&str; 13] = [
    "ac-table1",
    "ch-table2",
    "coupled-table3",
    "coupled-table4",
    "ac-energy",
    "ch-energy",
    "mbe-coarsen",
    "coupled-stab-sweep",
    "adaptive-demo",
    "bcp-second",
    "bcp-first",
    "bcp-third",
    "bcp-fourth",
];

const TABLE_DTS_SCALAR: &str = "2e-3,1e-3,5e-4,2.5e-4,1.25e-4,6.25e-5,3.125e-5";
const TABLE_DTS_COUPLED: &str = "4e-3,2e-3,1e-3,5e-4,2.5e-4,1.25e-4,6.25e-5";

fn accuracy_scalar(name: &'static str, model: &str, eps2: f64) -> Preset {
    Preset {
        name,
        config: format!(
            "model = {model}\n\
             eps2 = {eps2}\n\
             nx = 128\n\
             scheme = bdf2\n\
             ic = manufactured\n\
             t_end = 0.1\n\
             dt_list = {TABLE_DTS_SCALAR}\n\
             output_dir = out/{name}\n"
        ),
        job: Job::Accuracy {
            schemes: vec![SchemeName::Bdf2, SchemeName::Cn],
        },
    }
}

fn accuracy_coupled(name: &'static str, scheme: &str) -> Preset {
    Preset {
        name,
        config: format!(
            "model = coupled\n\
             eps_u = 0.075\n\
             eps_v = 0.075\n\
             sigma = 10\n\
             alpha = -0.1\n\
             beta = -0.1\n\
             gamma = 0\n\
             nx = 128\n\
             scheme = {scheme}\n\
             ic = manufactured\n\
             t_end = 0.1\n\
             dt_list = {TABLE_DTS_COUPLED}\n\
             output_dir = out/{name}\n"
        ),
        job: Job::Accuracy {
            schemes: vec![match scheme {
                "cn" => SchemeName::Cn,
                _ => SchemeName::Bdf2,
            }],
        },
    }
}

fn energy_decay(name: &'static str, model: &str, seed: u64) -> Preset {
    Preset {
        name,
        config: format!(
            "model = {model}\n\
             eps2 = 0.005\n\
             nx = 128\n\
             scheme = bdf2\n\
             dt = 1e-5\n\
             t_end = 0.1\n\
             ic = random\n\
             ic.lo = -0.001\n\
             ic.hi = 0.001\n\
             ic.shift = 0.03\n\
             seed = {seed}\n\
             output_dir = out/{name}\n"
        ),
        job: Job::Simulate,
    }
}

fn bcp(name: &'static str, eps_u: f64, eps_v: f64, alpha: f64, beta: f64, t_end: f64, times: &str, seed: u64) -> Preset {
    Preset {
        name,
        config: format!(
            "model = coupled\n\
             eps_u = {eps_u}\n\
             eps_v = {eps_v}\n\
             sigma = 10\n\
             alpha = {alpha}\n\
             beta = {beta}\n\
             gamma = 0\n\
             s_u = 1\n\
             s_v = 1\n\
             nx = 128\n\
             scheme = cn\n\
             adaptive.tol = 1e-3\n\
             t_end = {t_end}\n\
             ic = random\n\
             seed = {seed}\n\
             snapshot.times = {times}\n\
             record_every = 10\n\
             output_dir = out/{name}\n"
        ),
        job: Job::Simulate,
    }
}

/// Looks a preset up by name.
pub fn preset(name: &str) -> Option<Preset> {
    let p = match name {
        "ac-table1" => accuracy_scalar("ac-table1", "allen-cahn", 0.02),
        "ch-table2" => accuracy_scalar("ch-table2", "cahn-hilliard", 0.06),
        "coupled-table3" => accuracy_coupled("coupled-table3", "bdf2"),
        "coupled-table4" => accuracy_coupled("coupled-table4", "cn"),
        "ac-energy" => energy_decay("ac-energy", "allen-cahn", 7701),
        "ch-energy" => energy_decay("ch-energy", "cahn-hilliard", 7702),
        "mbe-coarsen" => Preset {
            name: "mbe-coarsen",
            config: "model = mbe\n\
                     eps = 0.03\n\
                     mobility = 1\n\
                     nx = 128\n\
                     scheme = bdf2\n\
                     dt = 1e-2\n\
                     t_end = 50\n\
                     ic = random\n\
                     ic.lo = -0.001\n\
                     ic.hi = 0.001\n\
                     seed = 7703\n\
                     snapshot.times = 2.5,5,10,30,50\n\
                     output_dir = out/mbe-coarsen\n"
                .to_string(),
            job: Job::Simulate,
        },
        "coupled-stab-sweep" => Preset {
            name: "coupled-stab-sweep",
            config: "model = coupled\n\
                     eps_u = 0.05\n\
                     eps_v = 0.05\n\
                     sigma = 10\n\
                     alpha = -0.1\n\
                     beta = 0.75\n\
                     gamma = 0\n\
                     s_u = 1\n\
                     s_v = 1\n\
                     nx = 128\n\
                     scheme = bdf2\n\
                     t_end = 0.5\n\
                     ic = random\n\
                     ic.zero_mean = true\n\
                     seed = 7704\n\
                     dt_list = 8e-3,2e-3,8e-4,4e-4,2e-4,1e-4\n\
                     rescue = true\n\
                     record_every = 5\n\
                     output_dir = out/coupled-stab-sweep\n"
                .to_string(),
            job: Job::StabSweep,
        },
        "adaptive-demo" => Preset {
            name: "adaptive-demo",
            config: "model = coupled\n\
                     eps_u = 0.075\n\
                     eps_v = 0.075\n\
                     sigma = 10\n\
                     alpha = -0.23\n\
                     beta = 0.5\n\
                     gamma = 0\n\
                     s_u = 5\n\
                     s_v = 5\n\
                     nx = 128\n\
                     scheme = cn\n\
                     adaptive.tol = 1e-3\n\
                     t_end = 1\n\
                     ic = random\n\
                     ic.zero_mean = true\n\
                     seed = 7705\n\
                     output_dir = out/adaptive-demo\n"
                .to_string(),
            job: Job::Simulate,
        },
        "bcp-second" => bcp("bcp-second", 0.075, 0.05, 0.1, -0.75, 2.0, "0.02,0.1,0.5,2", 7706),
        "bcp-first" => bcp("bcp-first", 0.075, 0.05, 0.1, 0.75, 2.0, "0.02,0.1,0.5,2", 7707),
        "bcp-third" => bcp("bcp-third", 0.03, 0.01, 0.33, 0.5, 3.0, "0.01,0.1,0.25,3", 7708),
        "bcp-fourth" => bcp("bcp-fourth", 0.03, 0.01, 0.33, -0.5, 3.0, "0.01,0.1,0.25,3", 7709),
        _ => return None,
    };
    Some(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::config::parse_config;

    #[test]
    fn every_preset_config_parses() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap_or_else(|| panic!("missing preset {name}"));
            let config = parse_config(&p.config)
                .unwrap_or_else(|e| panic!("preset {name} failed to parse: {e}"));
            assert_eq!(p.name, name);
            if matches!(p.job, Job::Accuracy { .. } | Job::StabSweep) {
                assert!(!config.dt_list.is_empty(), "{name} needs dt_list");
            }
        }
        assert!(preset("nonsense").is_none());
    }

    #[test]
    fn table_presets_carry_the_published_step_sizes() {
        let p = preset("ac-table1").unwrap();
        let c = parse_config(&p.config).unwrap();
        assert_eq!(c.dt_list.len(), 7);
        assert_eq!(c.dt_list[0], 2e-3);
        assert_eq!(c.dt_list[6], 3.125e-5);
        let p = preset("coupled-table3").unwrap();
        let c = parse_config(&p.config).unwrap();
        assert_eq!(c.dt_list[0], 4e-3);
        assert_eq!(c.dt_list[6], 6.25e-5);
    }
}
