//! Problem instances: order lines, customer orders, fleet parameters and the
//! warehouse they live in. Also the seeded instance generator and JSON I/O.

use std::fmt;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::warehouse::{Location, WarehouseLayout};

pub type LineId = usize;
pub type CustomerId = usize;

/// Shift length used by the generator defaults (8 hours).
pub const SHIFT_SECONDS: f64 = 8.0 * 3600.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderLine {
    pub id: LineId,
    pub customer: CustomerId,
    pub location: Location,
    pub quantity: u32,
    pub unit_weight: f64,
    pub pick_quantity: u32,
    pub return_quantity: u32,
    pub deadline: f64,
}

impl OrderLine {
    pub fn is_return(&self) -> bool {
        self.return_quantity > 0
    }

    /// Weight collected at the line's location (0 for restocks).
    pub fn pick_weight(&self) -> f64 {
        self.unit_weight * self.pick_quantity as f64
    }

    /// Weight carried from the depot and dropped at the location (0 for picks).
    pub fn return_weight(&self) -> f64 {
        self.unit_weight * self.return_quantity as f64
    }

    pub fn weight(&self) -> f64 {
        self.pick_weight() + self.return_weight()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerOrder {
    pub id: CustomerId,
    pub order_lines: Vec<LineId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub num_pickers: usize,
    pub max_batches_per_picker: usize,
    /// kg
    pub capacity: f64,
    /// seconds per order line
    pub pick_time: f64,
    /// seconds between two routes of the same picker
    pub break_time: f64,
    /// cost per second of picker time
    pub travel_cost_rate: f64,
    /// cost per second of lateness per order line
    pub tardiness_rate: f64,
    /// cost per extra batch touched by a customer order
    pub splitup_cost: f64,
    /// seconds
    pub horizon: f64,
    /// Charge tardiness per product instead of per order line.
    #[serde(default)]
    pub tardiness_per_product: bool,
}

impl Default for InstanceParams {
    fn default() -> Self {
        Self {
            num_pickers: 3,
            max_batches_per_picker: 8,
            capacity: 80.0,
            pick_time: 8.0,
            break_time: 300.0,
            travel_cost_rate: 0.54 / 60.0,
            tardiness_rate: 0.06 / 60.0,
            splitup_cost: 0.0,
            horizon: SHIFT_SECONDS,
            tardiness_per_product: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub layout: WarehouseLayout,
    pub params: InstanceParams,
    pub customers: Vec<CustomerOrder>,
    pub order_lines: Vec<OrderLine>,
}

/// One broken invariant, naming the offending entity and the rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub entity: String,
    pub rule: String,
}

impl Violation {
    pub fn new(entity: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            entity: entity.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.rule)
    }
}

impl Instance {
    pub fn num_lines(&self) -> usize {
        self.order_lines.len()
    }

    pub fn line(&self, id: LineId) -> &OrderLine {
        &self.order_lines[id]
    }

    /// Tardiness multiplier of a line (1, or its product count).
    pub fn tardiness_weight(&self, id: LineId) -> f64 {
        if self.params.tardiness_per_product {
            self.order_lines[id].quantity as f64
        } else {
            1.0
        }
    }

    #[inline]
    pub(crate) fn loc(&self, id: LineId) -> &Location {
        &self.order_lines[id].location
    }

    #[inline]
    pub(crate) fn depot(&self) -> &Location {
        &self.layout.depot
    }

    pub fn total_pick_weight(&self) -> f64 {
        self.order_lines.iter().map(OrderLine::pick_weight).sum()
    }

    pub fn total_return_weight(&self) -> f64 {
        self.order_lines.iter().map(OrderLine::return_weight).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.order_lines.iter().map(OrderLine::weight).sum()
    }

    /// Checks every data invariant; an empty list means the instance is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let p = &self.params;
        if let Err(e) = self.layout.validate() {
            out.push(Violation::new("layout", e.to_string()));
        }
        if p.num_pickers == 0 {
            out.push(Violation::new("params", "num_pickers must be at least 1"));
        }
        if p.max_batches_per_picker == 0 {
            out.push(Violation::new(
                "params",
                "max_batches_per_picker must be at least 1",
            ));
        }
        if !(p.capacity > 0.0) {
            out.push(Violation::new("params", "capacity must be positive"));
        }
        if !(p.horizon > 0.0) {
            out.push(Violation::new("params", "horizon must be positive"));
        }
        for (name, v) in [
            ("pick_time", p.pick_time),
            ("break_time", p.break_time),
            ("travel_cost_rate", p.travel_cost_rate),
            ("tardiness_rate", p.tardiness_rate),
            ("splitup_cost", p.splitup_cost),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                out.push(Violation::new("params", format!("{name} must be nonnegative")));
            }
        }

        let n = self.order_lines.len();
        for (idx, l) in self.order_lines.iter().enumerate() {
            let ent = format!("order_line {idx}");
            if l.id != idx {
                out.push(Violation::new(&ent, format!("id {} does not match position", l.id)));
            }
            if let Err(e) = self.layout.check_location(&l.location) {
                out.push(Violation::new(&ent, format!("location invalid: {e}")));
            }
            if (l.pick_quantity > 0) == (l.return_quantity > 0) {
                out.push(Violation::new(
                    &ent,
                    "exactly one of pick_quantity and return_quantity must be positive",
                ));
            }
            if l.quantity != l.pick_quantity + l.return_quantity {
                out.push(Violation::new(
                    &ent,
                    "quantity must equal pick_quantity + return_quantity",
                ));
            }
            if !(l.unit_weight > 0.0 && l.unit_weight.is_finite()) {
                out.push(Violation::new(&ent, "unit_weight must be positive"));
            }
            if !(l.deadline >= 0.0 && l.deadline.is_finite()) {
                out.push(Violation::new(&ent, "deadline must be nonnegative"));
            }
            if l.is_return() && l.deadline != p.horizon {
                out.push(Violation::new(&ent, "return line deadline must equal the horizon"));
            }
            if l.customer >= self.customers.len() {
                out.push(Violation::new(&ent, format!("unknown customer {}", l.customer)));
            }
        }

        let mut owner: Vec<Option<CustomerId>> = vec![None; n];
        for (idx, c) in self.customers.iter().enumerate() {
            let ent = format!("customer {idx}");
            if c.id != idx {
                out.push(Violation::new(&ent, format!("id {} does not match position", c.id)));
            }
            if c.order_lines.is_empty() {
                out.push(Violation::new(&ent, "customer order has no order lines"));
            }
            let mut returns = 0;
            for &i in &c.order_lines {
                if i >= n {
                    out.push(Violation::new(&ent, format!("unknown order line {i}")));
                    continue;
                }
                match owner[i] {
                    Some(other) => out.push(Violation::new(
                        &ent,
                        format!("order line {i} also belongs to customer {other}"),
                    )),
                    None => owner[i] = Some(idx),
                }
                if self.order_lines[i].customer != idx {
                    out.push(Violation::new(
                        &ent,
                        format!("order line {i} names customer {}", self.order_lines[i].customer),
                    ));
                }
                let l = &self.order_lines[i];
                if l.return_quantity > 0 && l.pick_quantity == 0 {
                    returns += 1;
                }
            }
            if returns > 0 && c.order_lines.len() > 1 {
                out.push(Violation::new(&ent, "a return must be a single-line customer order"));
            }
        }
        for (i, o) in owner.iter().enumerate() {
            if o.is_none() {
                out.push(Violation::new(
                    format!("order_line {i}"),
                    "not contained in any customer order",
                ));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let inst: Instance = serde_json::from_str(text).map_err(|source| Error::Parse {
            path: origin.to_path_buf(),
            source,
        })?;
        let violations = inst.validate();
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        Ok(inst)
    }

    /// Sub-instance keeping only lines that satisfy `keep`. Ids are compacted;
    /// the returned vector maps new line ids to original ones.
    pub fn restrict(&self, keep: impl Fn(&OrderLine) -> bool) -> (Instance, Vec<LineId>) {
        let mut new_of_old = vec![usize::MAX; self.order_lines.len()];
        let mut old_of_new = Vec::new();
        let mut customers = Vec::new();
        let mut lines = Vec::new();
        for c in &self.customers {
            let kept: Vec<LineId> = c
                .order_lines
                .iter()
                .copied()
                .filter(|&i| keep(&self.order_lines[i]))
                .collect();
            if kept.is_empty() {
                continue;
            }
            let cid = customers.len();
            let mut ids = Vec::with_capacity(kept.len());
            for old in kept {
                let nid = lines.len();
                new_of_old[old] = nid;
                old_of_new.push(old);
                let mut l = self.order_lines[old].clone();
                l.id = nid;
                l.customer = cid;
                lines.push(l);
                ids.push(nid);
            }
            customers.push(CustomerOrder { id: cid, order_lines: ids });
        }
        (
            Instance {
                layout: self.layout.clone(),
                params: self.params.clone(),
                customers,
                order_lines: lines,
            },
            old_of_new,
        )
    }
}

/// Hand-assembles small instances, mostly for tests and examples.
#[derive(Debug, Clone)]
pub struct InstanceBuilder {
    layout: WarehouseLayout,
    params: InstanceParams,
    customers: Vec<CustomerOrder>,
    lines: Vec<OrderLine>,
}

impl InstanceBuilder {
    pub fn new(layout: WarehouseLayout, params: InstanceParams) -> Self {
        Self {
            layout,
            params,
            customers: Vec::new(),
            lines: Vec::new(),
        }
    }

    /// Opens a new picking customer order and returns its id.
    pub fn customer(&mut self) -> CustomerId {
        let id = self.customers.len();
        self.customers.push(CustomerOrder {
            id,
            order_lines: Vec::new(),
        });
        id
    }

    pub fn pick(
        &mut self,
        customer: CustomerId,
        location: Location,
        quantity: u32,
        unit_weight: f64,
        deadline: f64,
    ) -> LineId {
        let id = self.lines.len();
        self.lines.push(OrderLine {
            id,
            customer,
            location,
            quantity,
            unit_weight,
            pick_quantity: quantity,
            return_quantity: 0,
            deadline,
        });
        self.customers[customer].order_lines.push(id);
        id
    }

    /// Adds a restock as its own single-line customer order.
    pub fn restock(&mut self, location: Location, quantity: u32, unit_weight: f64) -> LineId {
        let customer = self.customer();
        let id = self.lines.len();
        self.lines.push(OrderLine {
            id,
            customer,
            location,
            quantity,
            unit_weight,
            pick_quantity: 0,
            return_quantity: quantity,
            deadline: self.params.horizon,
        });
        self.customers[customer].order_lines.push(id);
        id
    }

    pub fn build(self) -> Result<Instance> {
        let inst = Instance {
            layout: self.layout,
            params: self.params,
            customers: self.customers,
            order_lines: self.lines,
        };
        let v = inst.validate();
        if v.is_empty() {
            Ok(inst)
        } else {
            Err(Error::Validation(v))
        }
    }
}

/// Knobs of the random instance generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenSpec {
    pub num_orderlines: usize,
    /// Share of order lines that are product returns.
    pub return_fraction: f64,
    pub num_aisles: usize,
    pub aisle_length: f64,
    pub aisle_width: f64,
    pub travel_speed: f64,
    /// Pick deadlines are drawn uniformly from `slot_length * k`, k = 1..=slots.
    pub deadline_slots: u32,
    pub deadline_slot_length: f64,
    /// Mean size of a picking customer order; sizes are uniform on 1..=2m-1.
    pub mean_lines_per_customer: usize,
    pub seed: u64,
    pub params: InstanceParams,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            num_orderlines: 200,
            return_fraction: 0.1,
            num_aisles: 35,
            aisle_length: 30.0,
            aisle_width: 2.5,
            travel_speed: 0.7,
            deadline_slots: 8,
            deadline_slot_length: 3600.0,
            mean_lines_per_customer: 4,
            seed: 0,
            params: InstanceParams::default(),
        }
    }
}

const QUANTITY_WEIGHTS: [u32; 4] = [40, 30, 20, 10];

pub fn generate(spec: &GenSpec) -> Result<Instance> {
    if spec.num_orderlines == 0 {
        return Err(Error::Input("num_orderlines must be positive".into()));
    }
    if !(0.0..=1.0).contains(&spec.return_fraction) {
        return Err(Error::Input("return_fraction must lie in [0, 1]".into()));
    }
    if spec.deadline_slots == 0 || !(spec.deadline_slot_length > 0.0) {
        return Err(Error::Input("deadline slots must be positive".into()));
    }
    if spec.mean_lines_per_customer == 0 {
        return Err(Error::Input("mean_lines_per_customer must be positive".into()));
    }
    let layout = WarehouseLayout::new(
        spec.num_aisles,
        spec.aisle_length,
        spec.aisle_width,
        spec.travel_speed,
    )?;
    let params = spec.params.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let quantity_dist = WeightedIndex::new(QUANTITY_WEIGHTS).expect("static weights");

    let n = spec.num_orderlines;
    let num_returns = ((spec.return_fraction * n as f64).round() as usize).min(n);
    let num_picks = n - num_returns;
    let offset_steps = (spec.aisle_length * 10.0).round() as u32;
    let max_group = 2 * spec.mean_lines_per_customer - 1;

    let draw_line = |rng: &mut ChaCha8Rng, id: LineId, customer: CustomerId| {
        let quantity = quantity_dist.sample(rng) as u32 + 1;
        let unit_weight = rng.random_range(1..=10u32) as f64 / 10.0;
        let aisle = rng.random_range(0..spec.num_aisles);
        let offset = (rng.random_range(0..=offset_steps) as f64 / 10.0).min(spec.aisle_length);
        OrderLine {
            id,
            customer,
            location: Location::new(aisle, offset),
            quantity,
            unit_weight,
            pick_quantity: 0,
            return_quantity: 0,
            deadline: 0.0,
        }
    };

    let mut customers = Vec::new();
    let mut lines = Vec::with_capacity(n);
    while lines.len() < num_picks {
        let cid = customers.len();
        let size = rng.random_range(1..=max_group).min(num_picks - lines.len());
        let deadline =
            spec.deadline_slot_length * rng.random_range(1..=spec.deadline_slots) as f64;
        let mut ids = Vec::with_capacity(size);
        for _ in 0..size {
            let id = lines.len();
            let mut l = draw_line(&mut rng, id, cid);
            l.pick_quantity = l.quantity;
            l.deadline = deadline;
            lines.push(l);
            ids.push(id);
        }
        customers.push(CustomerOrder { id: cid, order_lines: ids });
    }
    for _ in 0..num_returns {
        let cid = customers.len();
        let id = lines.len();
        let mut l = draw_line(&mut rng, id, cid);
        l.return_quantity = l.quantity;
        l.deadline = params.horizon;
        lines.push(l);
        customers.push(CustomerOrder { id: cid, order_lines: vec![id] });
    }

    let inst = Instance {
        layout,
        params,
        customers,
        order_lines: lines,
    };
    let violations = inst.validate();
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, seed: u64) -> GenSpec {
        GenSpec {
            num_orderlines: n,
            seed,
            ..GenSpec::default()
        }
    }

    #[test]
    fn generated_instance_is_valid() {
        let inst = generate(&spec(300, 1)).unwrap();
        assert!(inst.validate().is_empty());
        assert_eq!(inst.num_lines(), 300);
        assert_eq!(inst.order_lines.iter().filter(|l| l.is_return()).count(), 30);
    }

    #[test]
    fn quantity_mix_and_weights() {
        let inst = generate(&spec(20_000, 7)).unwrap();
        let n = inst.num_lines() as f64;
        let mut counts = [0usize; 4];
        for l in &inst.order_lines {
            counts[(l.quantity - 1) as usize] += 1;
            assert!(l.unit_weight >= 0.1 - 1e-12 && l.unit_weight <= 1.0 + 1e-12);
            let tenths = l.unit_weight * 10.0;
            assert!((tenths - tenths.round()).abs() < 1e-9);
            let off = l.location.offset * 10.0;
            assert!((off - off.round()).abs() < 1e-9);
        }
        let mean: f64 = inst.order_lines.iter().map(|l| l.quantity as f64).sum::<f64>() / n;
        assert!((mean - 2.0).abs() < 0.05, "mean quantity {mean}");
        // chi-squared against 40/30/20/10, 3 dof, 0.1% critical value 16.27
        let chi2: f64 = counts
            .iter()
            .zip(QUANTITY_WEIGHTS)
            .map(|(&o, w)| {
                let e = n * w as f64 / 100.0;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        assert!(chi2 < 16.27, "chi2 {chi2}");
    }

    #[test]
    fn zero_returns_when_fraction_zero() {
        let mut s = spec(500, 3);
        s.return_fraction = 0.0;
        let inst = generate(&s).unwrap();
        assert!(inst.order_lines.iter().all(|l| l.return_quantity == 0));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&spec(120, 99)).unwrap().to_json();
        let b = generate(&spec(120, 99)).unwrap().to_json();
        assert_eq!(a, b);
        let c = generate(&spec(120, 100)).unwrap().to_json();
        assert_ne!(a, c);
    }

    #[test]
    fn deadlines_on_full_slots() {
        let inst = generate(&spec(400, 5)).unwrap();
        for l in &inst.order_lines {
            if l.is_return() {
                assert_eq!(l.deadline, inst.params.horizon);
            } else {
                let k = l.deadline / 3600.0;
                assert!((1.0..=8.0).contains(&k) && k.fract() == 0.0);
            }
        }
    }

    #[test]
    fn weight_partition() {
        let inst = generate(&spec(600, 11)).unwrap();
        let total = inst.total_weight();
        let parts = inst.total_pick_weight() + inst.total_return_weight();
        assert!((total - parts).abs() < 1e-9);
    }

    #[test]
    fn rejects_empty_request() {
        assert!(matches!(generate(&spec(0, 1)), Err(Error::Input(_))));
        let mut s = spec(10, 1);
        s.return_fraction = 1.5;
        assert!(generate(&s).is_err());
    }

    #[test]
    fn mixed_pick_and_return_is_one_violation() {
        let mut inst = generate(&spec(50, 2)).unwrap();
        let i = inst.order_lines.iter().position(|l| !l.is_return()).unwrap();
        inst.order_lines[i].return_quantity = 1;
        inst.order_lines[i].quantity += 1;
        let v = inst.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].entity.contains(&i.to_string()));
    }

    #[test]
    fn early_return_deadline_is_one_violation() {
        let mut s = spec(50, 2);
        s.return_fraction = 0.2;
        let mut inst = generate(&s).unwrap();
        let i = inst.order_lines.iter().position(|l| l.is_return()).unwrap();
        inst.order_lines[i].deadline = inst.params.horizon - 1.0;
        assert_eq!(inst.validate().len(), 1);
    }

    #[test]
    fn overlapping_customers_rejected() {
        let mut inst = generate(&spec(40, 4)).unwrap();
        let stolen = inst.customers[1].order_lines[0];
        inst.customers[0].order_lines.push(stolen);
        assert!(!inst.validate().is_empty());
        let err = Instance::from_json(&inst.to_json(), Path::new("x.json")).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn missing_field_names_the_field() {
        let inst = generate(&spec(10, 4)).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&inst.to_json()).unwrap();
        v["params"].as_object_mut().unwrap().remove("capacity");
        let err = Instance::from_json(&v.to_string(), Path::new("bad.json")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(err.to_string().contains("capacity"), "{err}");
    }

    #[test]
    fn restrict_keeps_mapping() {
        let mut s = spec(80, 8);
        s.return_fraction = 0.25;
        let inst = generate(&s).unwrap();
        let (picks, map) = inst.restrict(|l| !l.is_return());
        assert!(picks.validate().is_empty());
        assert_eq!(picks.num_lines(), 60);
        for (new, &old) in map.iter().enumerate() {
            assert_eq!(picks.order_lines[new].location, inst.order_lines[old].location);
        }
    }
}
