use super::{ArtifactFamily, ArtifactKind, BiasDraw};

/// One parameter row: `[min, max]` sampled in `steps` linear steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRange {
    pub name: &'static str,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    pub integer: bool,
}

const fn real(name: &'static str, min: f64, max: f64, steps: usize) -> ParamRange {
    ParamRange {
        name,
        min,
        max,
        steps,
        integer: false,
    }
}

const fn int(name: &'static str, min: f64, max: f64, steps: usize) -> ParamRange {
    ParamRange {
        name,
        min,
        max,
        steps,
        integer: true,
    }
}

pub struct TableRow {
    pub family: ArtifactFamily,
    pub params: &'static [ParamRange],
}

/// Severity ranges per family. Spatial sizes refer to 256-pixel slices.
/// `circle_hard` is the circular-artifact set, drawn uniformly rather
/// than swept.
pub const TABLE_ROWS: [TableRow; 11] = [
    TableRow {
        family: ArtifactFamily::CircleHard,
        params: &[
            real("radius", 20.0, 40.0, 10),
            real("intensity", 0.0, 1.0, 10),
        ],
    },
    TableRow {
        family: ArtifactFamily::CircleSmooth,
        params: &[
            real("radius", 3.0, 30.0, 10),
            real("intensity", 0.0, 1.0, 10),
        ],
    },
    TableRow {
        family: ArtifactFamily::BlackStripe,
        params: &[int("thickness", 1.0, 5.0, 5)],
    },
    TableRow {
        family: ArtifactFamily::PatchSwap,
        params: &[real("patch_size", 30.0, 70.0, 10)],
    },
    TableRow {
        family: ArtifactFamily::Blur,
        params: &[real("sigma", 0.25, 2.5, 10)],
    },
    TableRow {
        family: ArtifactFamily::Noise,
        params: &[real("sigma", 0.01, 0.37, 10)],
    },
    TableRow {
        family: ArtifactFamily::Elastic,
        params: &[
            int("control_points", 5.0, 8.0, 4),
            real("max_displacement", 7.5, 30.0, 10),
        ],
    },
    TableRow {
        family: ArtifactFamily::Motion,
        params: &[
            real("rotation", 1.0, 10.0, 10),
            real("translation", 1.5, 15.0, 10),
        ],
    },
    TableRow {
        family: ArtifactFamily::BiasField,
        params: &[real("coefficients", 0.05, 0.5, 10)],
    },
    TableRow {
        family: ArtifactFamily::Ghosting,
        params: &[int("ghosts", 1.0, 2.0, 2), real("intensity", 0.4, 0.6, 10)],
    },
    TableRow {
        family: ArtifactFamily::Spike,
        params: &[int("spikes", 1.0, 2.0, 2), real("intensity", 0.25, 2.5, 10)],
    },
];

pub(crate) fn table_row(family: ArtifactFamily) -> &'static TableRow {
    TABLE_ROWS
        .iter()
        .find(|r| r.family == family)
        .expect("every family has a row")
}

impl ParamRange {
    /// `min + k (max - min) / (steps - 1)` for `k = 0..steps`, rounded for
    /// integer parameters. A single step yields `min`.
    pub fn values(&self, steps: usize) -> Vec<f64> {
        if steps <= 1 {
            return vec![self.min];
        }
        (0..steps)
            .map(|k| {
                let v = self.min + k as f64 * (self.max - self.min) / (steps - 1) as f64;
                if self.integer {
                    v.round()
                } else {
                    v
                }
            })
            .collect()
    }
}

fn kind_from(family: ArtifactFamily, v: &[f64]) -> ArtifactKind {
    match family {
        ArtifactFamily::CircleHard => ArtifactKind::CircleHard {
            radius: v[0],
            intensity: v[1],
        },
        ArtifactFamily::CircleSmooth => ArtifactKind::CircleSmooth {
            radius: v[0],
            intensity: v[1],
        },
        ArtifactFamily::BlackStripe => ArtifactKind::BlackStripe {
            thickness: v[0] as usize,
        },
        ArtifactFamily::PatchSwap => ArtifactKind::PatchSwap { size: v[0] },
        ArtifactFamily::Blur => ArtifactKind::Blur { sigma: v[0] },
        ArtifactFamily::Noise => ArtifactKind::Noise { sigma: v[0] },
        ArtifactFamily::Elastic => ArtifactKind::Elastic {
            control_points: v[0] as usize,
            max_displacement: v[1],
        },
        ArtifactFamily::Motion => ArtifactKind::Motion {
            rotation_deg: v[0],
            translation: v[1],
        },
        ArtifactFamily::BiasField => ArtifactKind::BiasField {
            coefficients: v[0],
            draw: BiasDraw::Uniform,
        },
        ArtifactFamily::Ghosting => ArtifactKind::Ghosting {
            ghosts: v[0] as usize,
            intensity: v[1],
        },
        ArtifactFamily::Spike => ArtifactKind::Spike {
            spikes: v[0] as usize,
            intensity: v[1],
        },
    }
}

/// Cross product of the family's parameter sweeps, first parameter
/// outermost. `steps` overrides the per-parameter step count of real
/// parameters; integer parameters always enumerate their integers.
pub fn sweep_grid(family: ArtifactFamily, steps: Option<usize>) -> Vec<ArtifactKind> {
    let row = table_row(family);
    let axes: Vec<Vec<f64>> = row
        .params
        .iter()
        .map(|p| {
            let n = if p.integer {
                p.steps
            } else {
                steps.unwrap_or(p.steps)
            };
            p.values(n)
        })
        .collect();
    let mut combos: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &axes {
        combos = combos
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut c = prefix.clone();
                    c.push(v);
                    c
                })
            })
            .collect();
    }
    combos.iter().map(|c| kind_from(family, c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blur_row() {
        let grid = sweep_grid(ArtifactFamily::Blur, None);
        assert_eq!(grid.len(), 10);
        let sigmas: Vec<f64> = grid.iter().map(|k| k.values()[0].1).collect();
        let expected = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5];
        for (s, e) in sigmas.iter().zip(expected) {
            assert!((s - e).abs() < 1e-12);
        }
    }

    #[test]
    fn ghosting_row() {
        let grid = sweep_grid(ArtifactFamily::Ghosting, None);
        assert_eq!(grid.len(), 20);
        assert_eq!(
            grid[0],
            ArtifactKind::Ghosting {
                ghosts: 1,
                intensity: 0.4
            }
        );
        match grid[19] {
            ArtifactKind::Ghosting { ghosts, intensity } => {
                assert_eq!(ghosts, 2);
                assert!((intensity - 0.6).abs() < 1e-12);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn integer_rows_enumerate_integers() {
        let grid = sweep_grid(ArtifactFamily::BlackStripe, None);
        let t: Vec<f64> = grid.iter().map(|k| k.values()[0].1).collect();
        assert_eq!(t, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let elastic = sweep_grid(ArtifactFamily::Elastic, None);
        assert_eq!(elastic.len(), 40);
        assert_eq!(sweep_grid(ArtifactFamily::Motion, None).len(), 100);
    }

    #[test]
    fn single_step_gives_min() {
        let grid = sweep_grid(ArtifactFamily::Noise, Some(1));
        assert_eq!(grid, vec![ArtifactKind::Noise { sigma: 0.01 }]);
    }

    #[test]
    fn every_setting_is_in_range() {
        for f in ArtifactFamily::ALL {
            for k in sweep_grid(f, None) {
                k.validate().unwrap();
                assert_eq!(k.family(), f);
            }
        }
    }
}
