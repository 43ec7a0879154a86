//! Top-down frame rendering: one portable-pixmap (P6) image per episode
//! step, drawn straight from a trajectory log. Road geometry comes from the
//! log's own meta line, so a log file is all a frame needs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::sim::geom::Vec2;
use crate::sim::map::MapGeometry;
use crate::sim::vehicle::footprint_corners;
use crate::trajlog::{StepRecord, TrajectoryLog};
use crate::{Error, Result};

pub type Rgb = [u8; 3];

/// Fixed palette. Vehicle fill encodes status; the first matching row wins:
/// contact, then off-road, then arrived, then normal.
pub const COLOR_CONTACT: Rgb = [0xE5, 0x39, 0x35];
pub const COLOR_OFF_ROAD: Rgb = [0xFB, 0x8C, 0x00];
pub const COLOR_ARRIVED: Rgb = [0x9E, 0x9E, 0x9E];
pub const COLOR_NORMAL: Rgb = [0x4C, 0xAF, 0x50];
pub const COLOR_ROAD: Rgb = [0x45, 0x5A, 0x64];
pub const COLOR_BACKGROUND: Rgb = [0xEC, 0xEF, 0xF1];
pub const COLOR_ZONE_OUTLINE: Rgb = [0xFF, 0xD5, 0x4F];
pub const COLOR_SECTOR: Rgb = [0x3F, 0x51, 0xB5];

#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    /// Pixels per meter.
    pub scale: f64,
    /// Extra world margin around the road, in meters.
    pub margin: f64,
    /// Draw the two boundary rays of the lidar front sector at this
    /// half-angle (degrees) ahead of each moving vehicle.
    pub front_sector_half_angle_deg: Option<f64>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig { scale: 4.0, margin: 2.0, front_sector_half_angle_deg: None }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Config(format!(
                "render scale must be a positive number of pixels per meter, got {}",
                self.scale
            )));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::Config(format!(
                "render margin must be non-negative, got {}",
                self.margin
            )));
        }
        Ok(())
    }
}

struct Canvas {
    w: usize,
    h: usize,
    px: Vec<u8>,
    /// World half-extent covered by the canvas; (0, 0) maps to the center.
    extent: f64,
    scale: f64,
}

impl Canvas {
    fn new(extent: f64, scale: f64) -> Canvas {
        let side = ((2.0 * extent * scale).ceil() as usize).max(1);
        Canvas { w: side, h: side, px: vec![0; side * side * 3], extent, scale }
    }

    fn world_at(&self, col: usize, row: usize) -> Vec2 {
        Vec2::new(
            (col as f64 + 0.5) / self.scale - self.extent,
            self.extent - (row as f64 + 0.5) / self.scale,
        )
    }

    fn pixel_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let col = (p.x + self.extent) * self.scale;
        let row = (self.extent - p.y) * self.scale;
        if col < 0.0 || row < 0.0 {
            return None;
        }
        let (col, row) = (col as usize, row as usize);
        (col < self.w && row < self.h).then_some((col, row))
    }

    fn set(&mut self, col: usize, row: usize, color: Rgb) {
        let i = (row * self.w + col) * 3;
        self.px[i..i + 3].copy_from_slice(&color);
    }

    /// Fill the oriented rectangle of a vehicle footprint.
    fn fill_footprint(&mut self, center: Vec2, heading: f64, length: f64, width: f64, color: Rgb) {
        let corners = footprint_corners(center, heading, length, width);
        let xs = corners.iter().map(|c| c.x);
        let ys = corners.iter().map(|c| c.y);
        let (min_x, max_x) = (xs.clone().fold(f64::MAX, f64::min), xs.fold(f64::MIN, f64::max));
        let (min_y, max_y) = (ys.clone().fold(f64::MAX, f64::min), ys.fold(f64::MIN, f64::max));

        let lo_col = (((min_x + self.extent) * self.scale).floor().max(0.0)) as usize;
        let hi_col = ((((max_x + self.extent) * self.scale).ceil()) as usize).min(self.w);
        let lo_row = (((self.extent - max_y) * self.scale).floor().max(0.0)) as usize;
        let hi_row = ((((self.extent - min_y) * self.scale).ceil()) as usize).min(self.h);

        let f = Vec2::from_angle(heading);
        let l = Vec2::new(-f.y, f.x);
        let (hl, hw) = (length / 2.0, width / 2.0);
        for row in lo_row..hi_row {
            for col in lo_col..hi_col {
                let p = self.world_at(col, row);
                let rel = p.sub(center);
                if rel.dot(f).abs() <= hl && rel.dot(l).abs() <= hw {
                    self.set(col, row, color);
                }
            }
        }
    }

    /// Draw a straight segment by dense sub-pixel sampling.
    fn draw_segment(&mut self, a: Vec2, b: Vec2, color: Rgb) {
        let d = b.sub(a);
        let len = d.norm();
        let steps = ((len * self.scale * 2.0).ceil() as usize).max(1);
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            if let Some((col, row)) = self.pixel_of(a.add(d.scale(t))) {
                self.set(col, row, color);
            }
        }
    }

    fn write_ppm(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write!(w, "P6\n{} {}\n255\n", self.w, self.h)?;
        w.write_all(&self.px)?;
        w.flush()?;
        Ok(())
    }
}

fn vehicle_color(r: &StepRecord) -> Rgb {
    if r.in_contact {
        COLOR_CONTACT
    } else if r.off_road {
        COLOR_OFF_ROAD
    } else if r.arrived {
        COLOR_ARRIVED
    } else {
        COLOR_NORMAL
    }
}

fn paint_background(map: &MapGeometry, canvas: &mut Canvas) {
    let outline = 0.4; // meters
    for row in 0..canvas.h {
        for col in 0..canvas.w {
            let p = canvas.world_at(col, row);
            let mut color = if map.on_road(p) { COLOR_ROAD } else { COLOR_BACKGROUND };
            if map.in_conflict_zone(p) && map.half_width - p.x.abs().max(p.y.abs()) <= outline {
                color = COLOR_ZONE_OUTLINE;
            }
            canvas.set(col, row, color);
        }
    }
}

/// Render one P6 frame per episode step into `out_dir`, named
/// `frame_{step:06}.ppm`, and return the written paths in step order. An
/// empty log renders zero frames and succeeds.
pub fn render_frames(
    log: &TrajectoryLog,
    out_dir: &Path,
    cfg: &RenderConfig,
) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    // Probe writability up front so a read-only directory fails cleanly
    // rather than after a partial frame sequence.
    let probe = out_dir.join(".write_probe");
    File::create(&probe).and_then(|_| std::fs::remove_file(&probe))?;

    if log.records.is_empty() {
        return Ok(Vec::new());
    }
    log.validate()?;

    let meta = &log.meta;
    let map = MapGeometry::new(meta.arm_length, meta.lane_width, meta.lanes_per_arm, 10.0)?;
    let extent = map.half_width + map.arm_length + cfg.margin;

    let mut background = Canvas::new(extent, cfg.scale);
    paint_background(&map, &mut background);

    // Records are (step, agent)-sorted; bucket them per step.
    let steps = log.episode_steps() as usize;
    let mut by_step: Vec<&[StepRecord]> = Vec::with_capacity(steps);
    let mut start = 0;
    for step in 1..=steps as u64 {
        let end = start
            + log.records[start..].iter().take_while(|r| r.step == step).count();
        by_step.push(&log.records[start..end]);
        start = end;
    }

    let mut paths = Vec::with_capacity(steps);
    for (idx, records) in by_step.iter().enumerate() {
        let mut canvas = Canvas {
            w: background.w,
            h: background.h,
            px: background.px.clone(),
            extent,
            scale: cfg.scale,
        };
        for r in *records {
            let center = Vec2::new(r.x, r.y);
            canvas.fill_footprint(
                center,
                r.heading,
                meta.vehicle_length,
                meta.vehicle_width,
                vehicle_color(r),
            );
            if let Some(half_deg) = cfg.front_sector_half_angle_deg {
                if !r.arrived {
                    let half = half_deg.to_radians();
                    let reach = meta.vehicle_length * 1.5;
                    for sign in [-1.0, 1.0] {
                        let dir = Vec2::from_angle(r.heading + sign * half);
                        let tip = center.add(dir.scale(meta.vehicle_length / 2.0 + reach));
                        canvas.draw_segment(center, tip, COLOR_SECTOR);
                    }
                }
            }
        }
        let path = out_dir.join(format!("frame_{:06}.ppm", idx + 1));
        canvas.write_ppm(&path)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajlog::tests::{blank_record, test_meta};

    fn read_ppm(path: &Path) -> (usize, usize, Vec<u8>) {
        let bytes = std::fs::read(path).unwrap();
        let header_end = bytes
            .windows(4)
            .position(|w| w == b"255\n")
            .map(|p| p + 4)
            .unwrap();
        let header = std::str::from_utf8(&bytes[..header_end]).unwrap();
        let mut it = header.split_ascii_whitespace();
        assert_eq!(it.next(), Some("P6"));
        let w: usize = it.next().unwrap().parse().unwrap();
        let h: usize = it.next().unwrap().parse().unwrap();
        assert_eq!(it.next(), Some("255"));
        let px = bytes[header_end..].to_vec();
        assert_eq!(px.len(), w * h * 3);
        (w, h, px)
    }

    fn pixel_at(log_extent: f64, scale: f64, w: usize, px: &[u8], p: Vec2) -> Rgb {
        let col = ((p.x + log_extent) * scale) as usize;
        let row = ((log_extent - p.y) * scale) as usize;
        let i = (row * w + col) * 3;
        [px[i], px[i + 1], px[i + 2]]
    }

    fn demo_log(steps: u64) -> TrajectoryLog {
        let mut log = TrajectoryLog::new(test_meta(2, steps.max(1)));
        for step in 1..=steps {
            for agent in 0..2 {
                let mut r = blank_record(step, agent);
                r.x = -20.0 + step as f64 + 8.0 * agent as f64;
                r.y = if agent == 0 { 1.75 } else { -1.75 };
                log.records.push(r);
            }
        }
        log
    }

    #[test]
    fn ten_step_log_renders_exactly_ten_frames() {
        let dir = tempfile::tempdir().unwrap();
        let paths = render_frames(&demo_log(10), dir.path(), &RenderConfig::default()).unwrap();
        assert_eq!(paths.len(), 10);
        assert_eq!(paths[0].file_name().unwrap(), "frame_000001.ppm");
        assert_eq!(paths[9].file_name().unwrap(), "frame_000010.ppm");
        for p in &paths {
            assert!(p.exists());
        }
        let (w, h, _) = read_ppm(&paths[0]);
        // extent = half_width (7) + arm_length (60) + margin (2) = 69 m.
        assert_eq!((w, h), (552, 552));
    }

    #[test]
    fn empty_log_renders_zero_frames_and_succeeds() {
        let dir = tempfile::tempdir().unwrap();
        let log = TrajectoryLog::new(test_meta(2, 10));
        let paths = render_frames(&log, dir.path(), &RenderConfig::default()).unwrap();
        assert!(paths.is_empty());
        assert_eq!(
            std::fs::read_dir(dir.path()).unwrap().count(),
            0,
            "no stray files for an empty log"
        );
    }

    #[test]
    fn vehicle_status_colors_match_the_palette() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = TrajectoryLog::new(test_meta(4, 4));
        let place = |agent: usize, x: f64, y: f64| {
            let mut r = blank_record(1, agent);
            r.x = x;
            r.y = y;
            r
        };
        let mut normal = place(0, -20.0, 1.75);
        normal.off_road = false;
        let mut contact = place(1, -20.0, -1.75);
        contact.in_contact = true;
        contact.contact_onset = true;
        let mut off = place(2, 20.0, 20.0);
        off.off_road = true;
        let mut arrived = place(3, 20.0, 1.75);
        arrived.arrived = true;
        log.records.extend([normal, contact, off, arrived]);

        let cfg = RenderConfig::default();
        let paths = render_frames(&log, dir.path(), &cfg).unwrap();
        let (w, _, px) = read_ppm(&paths[0]);
        let extent = 7.0 + 60.0 + cfg.margin;
        let at = |x, y| pixel_at(extent, cfg.scale, w, &px, Vec2::new(x, y));
        assert_eq!(at(-20.0, 1.75), COLOR_NORMAL);
        assert_eq!(at(-20.0, -1.75), COLOR_CONTACT);
        assert_eq!(at(20.0, 20.0), COLOR_OFF_ROAD);
        assert_eq!(at(20.0, 1.75), COLOR_ARRIVED);
        // Road vs background vs conflict-zone outline.
        assert_eq!(at(-40.0, 0.0), COLOR_ROAD);
        assert_eq!(at(-40.0, 30.0), COLOR_BACKGROUND);
        assert_eq!(at(6.9, 0.0), COLOR_ZONE_OUTLINE);
    }

    #[test]
    fn unwritable_directory_is_an_explicit_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("blocker");
        std::fs::write(&blocker, b"not a directory").unwrap();
        let err = render_frames(&demo_log(2), &blocker, &RenderConfig::default());
        assert!(err.is_err());
    }

    #[test]
    fn frames_are_deterministic_and_sector_overlay_changes_them() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let log = demo_log(2);
        let plain = RenderConfig::default();
        let a = render_frames(&log, dir_a.path(), &plain).unwrap();
        let b = render_frames(&log, dir_b.path(), &plain).unwrap();
        assert_eq!(std::fs::read(&a[0]).unwrap(), std::fs::read(&b[0]).unwrap());

        let dir_c = tempfile::tempdir().unwrap();
        let overlay = RenderConfig {
            front_sector_half_angle_deg: Some(25.0),
            ..RenderConfig::default()
        };
        let c = render_frames(&log, dir_c.path(), &overlay).unwrap();
        assert_ne!(std::fs::read(&a[0]).unwrap(), std::fs::read(&c[0]).unwrap());
    }

    #[test]
    fn malformed_nonempty_log_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = TrajectoryLog::new(test_meta(2, 4));
        let mut r = blank_record(1, 7); // agent out of range
        r.x = 1.0;
        log.records.push(r);
        assert!(render_frames(&log, dir.path(), &RenderConfig::default()).is_err());
    }
}
