//! Built-in benchmark worlds: a 43.2 m square hall with obstacles around a
//! central corridor, a variant with many turns, and a scripted crowd of
//! pedestrians crossing the hall.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::ConfigError;
use crate::geom::Point;
use crate::kinematics::{PlannerParams, RobotState};
use crate::sim::Scenario;
use crate::world::{write_crowd_csv, MovingObstacle, OccupancyGrid, TrajectorySample};

pub const MAP_CELLS: usize = 200;
pub const MAP_RESOLUTION: f64 = 0.216;
pub const MAP_SIZE: f64 = MAP_CELLS as f64 * MAP_RESOLUTION;

pub const ROBOT_RADIUS: f64 = 0.3;
pub const PEDESTRIAN_RADIUS: f64 = 0.3;

/// Axis-aligned rectangle in world coordinates, `[x0, x1] x [y0, y1]`.
pub type Rect = [f64; 4];

/// Marks every cell whose center lies inside one of `rects` as occupied.
/// The outer ring of cells is always a wall.
pub fn rasterize(rects: &[Rect]) -> OccupancyGrid {
    let mut grid = OccupancyGrid::free(MAP_CELLS, MAP_CELLS, MAP_RESOLUTION).expect("static dimensions");
    for row in 0..MAP_CELLS {
        for col in 0..MAP_CELLS {
            let c = grid.cell_center(col, row);
            let border = row == 0 || col == 0 || row == MAP_CELLS - 1 || col == MAP_CELLS - 1;
            let inside = rects
                .iter()
                .any(|r| c.x >= r[0] && c.x <= r[1] && c.y >= r[2] && c.y <= r[3]);
            if border || inside {
                grid.set(col, row, 1.0);
            }
        }
    }
    grid
}

/// Obstacles of the corridor hall.
pub const CORRIDOR_HALL: &[Rect] = &[
    [8.0, 20.0, 17.0, 20.0],
    [23.0, 35.0, 23.0, 26.0],
    [17.0, 20.0, 26.0, 36.0],
    [23.0, 26.0, 7.0, 17.0],
    [5.0, 11.0, 30.0, 33.0],
    [32.0, 38.0, 10.0, 13.0],
];

/// Obstacles of the many-turns hall: a field of short staggered walls, so
/// every route bends repeatedly on its way across.
pub const ZIGZAG_HALL: &[Rect] = &[
    [6.0, 14.0, 10.0, 11.5],
    [14.0, 15.5, 14.0, 22.0],
    [18.0, 26.0, 12.0, 13.5],
    [22.0, 23.5, 17.0, 27.0],
    [28.0, 36.0, 18.0, 19.5],
    [10.0, 18.0, 26.0, 27.5],
    [28.0, 29.5, 26.0, 36.0],
    [33.0, 41.0, 32.0, 33.5],
    [6.0, 7.5, 18.0, 26.0],
    [34.0, 35.5, 6.0, 14.0],
    [19.0, 25.5, 33.0, 34.5],
    [15.0, 16.5, 32.0, 40.0],
    [36.0, 43.2, 25.0, 26.5],
];

pub fn corridor_hall() -> OccupancyGrid {
    rasterize(CORRIDOR_HALL)
}

pub fn zigzag_hall() -> OccupancyGrid {
    rasterize(ZIGZAG_HALL)
}

/// Ten pedestrians pacing back and forth across the hall.
pub fn crossing_crowd() -> Vec<MovingObstacle> {
    // Lanes run across the start-goal diagonal through open floor, away
    // from the narrow passages around the central gap.
    const LANES: [(f64, f64, f64, f64, f64); 10] = [
        // (x0, y0, x1, y1, speed)
        (4.0, 14.0, 14.0, 4.0, 0.6),
        (12.0, 16.0, 21.0, 7.0, 0.5),
        (4.0, 28.0, 14.0, 22.0, 0.7),
        (28.0, 20.0, 36.0, 14.0, 0.5),
        (22.0, 40.0, 30.0, 32.0, 0.6),
        (26.0, 41.0, 40.0, 28.0, 0.5),
        (33.0, 30.0, 41.0, 22.0, 0.7),
        (12.0, 40.0, 16.0, 36.0, 0.4),
        (30.0, 8.0, 40.0, 2.0, 0.5),
        (2.0, 38.0, 8.0, 35.0, 0.6),
    ];
    const HORIZON: f64 = 900.0;
    LANES
        .iter()
        .enumerate()
        .map(|(i, &(x0, y0, x1, y1, speed))| {
            let a = Point::new(x0, y0);
            let b = Point::new(x1, y1);
            let leg = a.distance(&b) / speed;
            let mut samples = Vec::new();
            let mut t = 0.0;
            let mut forward = true;
            while t <= HORIZON {
                samples.push(TrajectorySample {
                    t,
                    pos: if forward { a } else { b },
                });
                t += leg;
                forward = !forward;
            }
            MovingObstacle::new(i as u32 + 1, PEDESTRIAN_RADIUS, samples).expect("positive radius")
        })
        .collect()
}

/// Parameters used for the built-in scenarios: library defaults except for
/// a meet radius above the neighbourhood radius, a capped heuristic burst and
/// a larger per-cycle iteration budget.
pub fn default_params() -> PlannerParams {
    PlannerParams {
        meet_radius: 5.0,
        iterations_per_cycle: 300,
        heuristic_burst: Some(30),
        ..PlannerParams::default()
    }
}

fn scenario(grid: OccupancyGrid, start: Point, goal: Point, crowd: Vec<MovingObstacle>, seed: u64) -> Scenario {
    let theta = (goal.y - start.y).atan2(goal.x - start.x);
    Scenario {
        grid,
        start: RobotState::at_rest(start.x, start.y, theta, 0.0),
        goal,
        crowd,
        robot_radius: ROBOT_RADIUS,
        params: default_params(),
        max_sim_time: 3600.0,
        seed,
    }
}

pub const CORRIDOR_START: Point = Point { x: 3.0, y: 3.0 };
pub const CORRIDOR_GOAL: Point = Point { x: 40.0, y: 40.0 };
pub const ZIGZAG_START: Point = Point { x: 4.0, y: 4.0 };
pub const ZIGZAG_GOAL: Point = Point { x: 39.0, y: 39.0 };

/// Corridor hall without pedestrians.
pub fn corridor_static(seed: u64) -> Scenario {
    scenario(corridor_hall(), CORRIDOR_START, CORRIDOR_GOAL, Vec::new(), seed)
}

/// Corridor hall with the crossing crowd.
pub fn corridor_crowd(seed: u64) -> Scenario {
    scenario(corridor_hall(), CORRIDOR_START, CORRIDOR_GOAL, crossing_crowd(), seed)
}

/// Many-turns hall without pedestrians.
pub fn zigzag_static(seed: u64) -> Scenario {
    scenario(zigzag_hall(), ZIGZAG_START, ZIGZAG_GOAL, Vec::new(), seed)
}

/// Names of the built-in scenarios, as used for their files.
pub const NAMES: [&str; 3] = ["corridor_static", "corridor_crowd", "zigzag_static"];

pub fn by_name(name: &str, seed: u64) -> Option<Scenario> {
    match name {
        "corridor_static" => Some(corridor_static(seed)),
        "corridor_crowd" => Some(corridor_crowd(seed)),
        "zigzag_static" => Some(zigzag_static(seed)),
        _ => None,
    }
}

/// Scenario file text for `scenario`, referring to `grid` and `crowd` by
/// relative path. Only parameters that differ from the defaults are listed.
pub fn scenario_toml(scenario: &Scenario, grid: &str, crowd: Option<&str>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "grid = {grid:?}");
    if let Some(c) = crowd {
        let _ = writeln!(s, "crowd = {c:?}");
        let _ = writeln!(s, "obstacle_radius = {:?}", PEDESTRIAN_RADIUS);
    }
    let st = &scenario.start;
    let _ = writeln!(s, "start = [{:?}, {:?}, {:?}]", st.x, st.y, st.theta);
    let _ = writeln!(s, "goal = [{:?}, {:?}]", scenario.goal.x, scenario.goal.y);
    let _ = writeln!(s, "robot_radius = {:?}", scenario.robot_radius);
    let _ = writeln!(s, "max_sim_time = {:?}", scenario.max_sim_time);
    let _ = writeln!(s, "seed = {}", scenario.seed);
    let p = &scenario.params;
    let d = PlannerParams::default();
    s.push_str("\n[params]\n");
    if p.meet_radius != d.meet_radius {
        let _ = writeln!(s, "meet_radius = {:?}", p.meet_radius);
    }
    if p.iterations_per_cycle != d.iterations_per_cycle {
        let _ = writeln!(s, "iterations_per_cycle = {}", p.iterations_per_cycle);
    }
    if let Some(b) = p.heuristic_burst {
        let _ = writeln!(s, "heuristic_burst = {b}");
    }
    s
}

/// Writes every built-in scenario as `<name>.toml` plus its grid and crowd
/// files into `dir`. Returns the scenario file paths.
pub fn write_files(dir: &Path) -> Result<Vec<PathBuf>, ConfigError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ConfigError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let put = |name: &str, text: &str| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(io(&path))
    };
    put("corridor_hall.grid", &corridor_hall().to_text())?;
    put("zigzag_hall.grid", &zigzag_hall().to_text())?;
    put("crossing_crowd.csv", &write_crowd_csv(&crossing_crowd()))?;
    let mut out = Vec::new();
    for name in NAMES {
        let sc = by_name(name, 0).expect("listed name");
        let grid = if name.starts_with("zigzag") {
            "zigzag_hall.grid"
        } else {
            "corridor_hall.grid"
        };
        let crowd = (!sc.crowd.is_empty()).then_some("crossing_crowd.csv");
        let file = format!("{name}.toml");
        put(&file, &scenario_toml(&sc, grid, crowd))?;
        out.push(dir.join(file));
    }
    Ok(out)
}
