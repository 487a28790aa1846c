//! Browser bindings: three operations, JSON options in, JSON results out.
//!
//! Each export is a thin wrapper over a plain function so the logic builds
//! and tests natively as well as on `wasm32-unknown-unknown`.

use hetnet_lab::capacity::{sweep_power, Association, GainIndexing, PowerModel};
use hetnet_lab::coopnet::{outage_probability, CoopConfig};
use hetnet_lab::placement::{hybrid_place, random_placement_cost, PlacementParams, SiteSet};
use hetnet_lab::precoding::PrecoderScheme;
use hetnet_lab::rng::{derive_rng, split_seed};
use hetnet_lab::scenario::{Deployment, Point, ScenarioConfig};
use hetnet_lab::units::db_to_linear;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn parse<T: for<'de> Deserialize<'de> + Default>(options: &str) -> Result<T, String> {
    if options.trim().is_empty() {
        return Ok(T::default());
    }
    serde_json::from_str(options).map_err(|e| format!("options: {e}"))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    pub scenario: ScenarioConfig,
    pub scheme: PrecoderScheme,
    pub grid_dbm: Vec<f64>,
    pub power_model: PowerModel,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            scenario: ScenarioConfig {
                num_ues: 8,
                master_seed: 7,
                ..ScenarioConfig::default()
            },
            scheme: PrecoderScheme::Mrt,
            grid_dbm: (0..=15).map(|i| f64::from(2 * i)).collect(),
            power_model: PowerModel {
                efficiency: 0.5,
                circuit_power: 0.1,
            },
        }
    }
}

/// Closed-form EE over a power grid plus the deployment layout for drawing.
pub fn ee_sweep_json(options: &str) -> Result<String, String> {
    let o: SweepOptions = parse(options)?;
    let d = Deployment::generate(&o.scenario).map_err(|e| e.to_string())?;
    let points = sweep_power(
        &d,
        o.scheme,
        &o.grid_dbm,
        &o.power_model,
        Association::All,
        GainIndexing::Receiver,
    )
    .map_err(|e| e.to_string())?;
    Ok(json!({
        "points": points,
        "cells": d.topology.cell_positions,
        "ues": d.topology.ue_positions,
        "area_side": o.scenario.area_side,
    })
    .to_string())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutageOptions {
    pub config: CoopConfig,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for OutageOptions {
    fn default() -> Self {
        OutageOptions {
            config: CoopConfig::default(),
            snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            trials: 5000,
            seed: 1,
        }
    }
}

#[derive(Serialize)]
struct OutagePoint {
    tx_snr_db: f64,
    outage_probability: f64,
    ci_low: f64,
    ci_high: f64,
}

/// Monte Carlo outage probability over a transmit-SNR grid.
pub fn outage_curve_json(options: &str) -> Result<String, String> {
    let o: OutageOptions = parse(options)?;
    if o.trials == 0 {
        return Err("trials must be >= 1".into());
    }
    let mut points = Vec::with_capacity(o.snr_grid_db.len());
    for (i, &db) in o.snr_grid_db.iter().enumerate() {
        let cfg = CoopConfig {
            tx_snr: db_to_linear(db),
            ..o.config.clone()
        };
        let est = outage_probability(&cfg, o.trials, split_seed(o.seed, "coop-grid", i as u64))
            .map_err(|e| e.to_string())?;
        points.push(OutagePoint {
            tx_snr_db: db,
            outage_probability: est.probability,
            ci_low: est.ci_low,
            ci_high: est.ci_high,
        });
    }
    Ok(json!({ "points": points }).to_string())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlacementOptions {
    pub num_sites: usize,
    pub area_side: f64,
    pub params: PlacementParams,
    pub random_draws: usize,
    pub seed: u64,
}

impl Default for PlacementOptions {
    fn default() -> Self {
        PlacementOptions {
            num_sites: 30,
            area_side: 1000.0,
            params: PlacementParams::default(),
            random_draws: 100,
            seed: 1,
        }
    }
}

/// Hybrid K-means + p-center placement on random sites, with the random
/// baseline for comparison.
pub fn place_replicas_json(options: &str) -> Result<String, String> {
    let o: PlacementOptions = parse(options)?;
    if o.num_sites == 0 {
        return Err("num_sites must be >= 1".into());
    }
    let mut rng = derive_rng(o.seed, "sites", 0);
    let points: Vec<Point> = (0..o.num_sites)
        .map(|_| {
            Point::new(
                rng.random::<f64>() * o.area_side,
                rng.random::<f64>() * o.area_side,
            )
        })
        .collect();
    let sites =
        SiteSet::from_points(points.clone(), vec![1.0; o.num_sites]).map_err(|e| e.to_string())?;
    let placement = hybrid_place(&sites, &o.params, &mut derive_rng(o.seed, "placement", 0))
        .map_err(|e| e.to_string())?;
    let centers = placement.centers();
    let random_mean = (0..o.random_draws)
        .map(|t| {
            let mut r = derive_rng(o.seed, "placement-random", t as u64);
            random_placement_cost(&sites, centers.len(), o.params.time_per_unit, &mut r)
        })
        .sum::<f64>()
        / o.random_draws.max(1) as f64;
    Ok(json!({
        "sites": points,
        "cluster": placement.cluster,
        "nearest_center": placement.nearest_center,
        "centers": centers,
        "cost": placement.cost,
        "worst_case": placement.worst_case,
        "random_mean_cost": if o.random_draws > 0 { Some(random_mean) } else { None },
        "area_side": o.area_side,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn ee_sweep(options: &str) -> Result<String, JsError> {
    ee_sweep_json(options).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn outage_curve(options: &str) -> Result<String, JsError> {
    outage_curve_json(options).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn place_replicas(options: &str) -> Result<String, JsError> {
    place_replicas_json(options).map_err(|e| JsError::new(&e))
}
