//! Rectangular parallel-aisle warehouse with a front and a back cross aisle.
//!
//! Aisles are indexed left to right and spaced `aisle_width` meters apart
//! (center to center). A location is an aisle index plus an offset into the
//! aisle measured from the front cross aisle. Both sides of an aisle are
//! reachable from its center line, so the picker never pays for crossing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub aisle: usize,
    pub offset: f64,
}

impl Location {
    pub fn new(aisle: usize, offset: f64) -> Self {
        Self { aisle, offset }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarehouseLayout {
    pub num_aisles: usize,
    pub aisle_length: f64,
    pub aisle_width: f64,
    pub depot: Location,
    pub travel_speed: f64,
}

impl Default for WarehouseLayout {
    fn default() -> Self {
        Self {
            num_aisles: 35,
            aisle_length: 30.0,
            aisle_width: 2.5,
            depot: Location::new(0, 0.0),
            travel_speed: 0.7,
        }
    }
}

impl WarehouseLayout {
    pub fn new(
        num_aisles: usize,
        aisle_length: f64,
        aisle_width: f64,
        travel_speed: f64,
    ) -> Result<Self> {
        let layout = Self {
            num_aisles,
            aisle_length,
            aisle_width,
            depot: Location::new(0, 0.0),
            travel_speed,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// Builder-style override of the depot position.
    pub fn with_depot_aisle(mut self, aisle: usize) -> Result<Self> {
        self.depot = Location::new(aisle, 0.0);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_aisles == 0 {
            return Err(Error::Input("num_aisles must be at least 1".into()));
        }
        if !(self.aisle_length > 0.0 && self.aisle_length.is_finite()) {
            return Err(Error::Input("aisle_length must be positive".into()));
        }
        if !(self.aisle_width > 0.0 && self.aisle_width.is_finite()) {
            return Err(Error::Input("aisle_width must be positive".into()));
        }
        if !(self.travel_speed > 0.0 && self.travel_speed.is_finite()) {
            return Err(Error::Input("travel_speed must be positive".into()));
        }
        if self.depot.offset != 0.0 {
            return Err(Error::Input("depot must lie on the front cross aisle".into()));
        }
        self.check_location(&self.depot)
    }

    pub fn check_location(&self, loc: &Location) -> Result<()> {
        if loc.aisle >= self.num_aisles {
            return Err(Error::Input(format!(
                "aisle {} out of range [0, {})",
                loc.aisle, self.num_aisles
            )));
        }
        if !(loc.offset >= 0.0 && loc.offset <= self.aisle_length) {
            return Err(Error::Input(format!(
                "offset {} out of range [0, {}]",
                loc.offset, self.aisle_length
            )));
        }
        Ok(())
    }

    /// Shortest walking distance in meters between two valid locations.
    pub fn distance(&self, a: &Location, b: &Location) -> Result<f64> {
        self.check_location(a)?;
        self.check_location(b)?;
        Ok(self.dist(a, b))
    }

    /// Travel time in seconds at the layout's constant speed.
    pub fn travel_time(&self, a: &Location, b: &Location) -> Result<f64> {
        Ok(self.distance(a, b)? / self.travel_speed)
    }

    /// Unchecked distance for the solver's inner loops.
    #[inline]
    pub(crate) fn dist(&self, a: &Location, b: &Location) -> f64 {
        if a.aisle == b.aisle {
            return (a.offset - b.offset).abs();
        }
        let steps = a.aisle.abs_diff(b.aisle) as f64;
        let via_front = a.offset + b.offset;
        let via_back = 2.0 * self.aisle_length - a.offset - b.offset;
        steps * self.aisle_width + via_front.min(via_back)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> WarehouseLayout {
        WarehouseLayout::new(10, 30.0, 2.5, 0.7).unwrap()
    }

    #[test]
    fn identity_is_zero() {
        let l = layout();
        let a = Location::new(3, 12.0);
        assert_eq!(l.distance(&a, &a).unwrap(), 0.0);
        assert_eq!(l.travel_time(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn same_aisle_is_absolute_difference() {
        let l = layout();
        let d = l
            .distance(&Location::new(2, 5.0), &Location::new(2, 12.0))
            .unwrap();
        assert_eq!(d, 7.0);
        let t = l
            .travel_time(&Location::new(2, 5.0), &Location::new(2, 12.0))
            .unwrap();
        assert!((t - 10.0).abs() < 1e-12);
    }

    #[test]
    fn cross_aisle_takes_shorter_cross_aisle() {
        let l = layout();
        let a = Location::new(0, 10.0);
        let b = Location::new(2, 20.0);
        // front: 10 + 20 = 30, back: (30-10) + (30-20) = 30
        let front = 10.0 + 20.0;
        let back = (30.0 - 10.0) + (30.0 - 20.0);
        let expected = 2.0 * 2.5 + f64::min(front, back);
        assert_eq!(expected, 35.0);
        assert_eq!(l.distance(&a, &b).unwrap(), expected);
        assert!((l.travel_time(&a, &b).unwrap() - 50.0).abs() < 1e-9);

        // asymmetric case picks the back cross aisle
        let c = Location::new(1, 28.0);
        let e = Location::new(4, 25.0);
        assert_eq!(l.distance(&c, &e).unwrap(), 3.0 * 2.5 + 2.0 + 5.0);
    }

    #[test]
    fn rejects_invalid_locations() {
        let l = layout();
        assert!(l
            .distance(&Location::new(10, 1.0), &Location::new(0, 0.0))
            .is_err());
        assert!(l
            .distance(&Location::new(1, 30.1), &Location::new(0, 0.0))
            .is_err());
        assert!(l
            .distance(&Location::new(1, -0.1), &Location::new(0, 0.0))
            .is_err());
    }

    #[test]
    fn rejects_bad_layouts() {
        assert!(WarehouseLayout::new(0, 30.0, 2.5, 0.7).is_err());
        assert!(WarehouseLayout::new(3, 0.0, 2.5, 0.7).is_err());
        assert!(WarehouseLayout::new(3, 30.0, -1.0, 0.7).is_err());
        assert!(WarehouseLayout::new(3, 30.0, 2.5, 0.0).is_err());
        assert!(layout().with_depot_aisle(10).is_err());
        assert_eq!(layout().with_depot_aisle(4).unwrap().depot.aisle, 4);
    }
}
