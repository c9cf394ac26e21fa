//! Bill-of-materials comparison between a radio with one transceiver channel
//! per antenna and one that multiplexes several antennas onto each channel.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_PRICE_BOOK: &str = include_str!("../config/pricebook.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceBook {
    /// True when the prices are placeholders rather than quotes.
    #[serde(default)]
    pub estimated: bool,
    #[serde(default = "default_currency")]
    pub currency: String,
    pub transceiver_ic_price: f64,
    pub channels_per_ic: usize,
    pub pa_price: f64,
    pub lna_price: f64,
    pub filter_price: f64,
    pub switch_price: f64,
}

fn default_currency() -> String {
    "USD".to_string()
}

impl Default for PriceBook {
    /// The bundled, ESTIMATED price book.
    fn default() -> Self {
        Self::from_toml(DEFAULT_PRICE_BOOK).expect("bundled price book parses")
    }
}

impl PriceBook {
    pub fn from_toml(text: &str) -> Result<Self> {
        let book: PriceBook = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        book.validate()?;
        Ok(book)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let prices = [
            ("transceiver_ic_price", self.transceiver_ic_price),
            ("pa_price", self.pa_price),
            ("lna_price", self.lna_price),
            ("filter_price", self.filter_price),
            ("switch_price", self.switch_price),
        ];
        for (name, p) in prices {
            if !(p >= 0.0) {
                return Err(Error::invalid(format!("{name} must be >= 0, got {p}")));
            }
        }
        if self.channels_per_ic == 0 {
            return Err(Error::invalid("channels_per_ic must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub n_antennas: usize,
    /// Antennas sharing one converter channel; 1 is the traditional radio.
    pub multiplex_factor: usize,
}

impl ArchitectureSpec {
    pub fn traditional(n_antennas: usize) -> Self {
        Self {
            n_antennas,
            multiplex_factor: 1,
        }
    }

    pub fn shared(n_antennas: usize, multiplex_factor: usize) -> Self {
        Self {
            n_antennas,
            multiplex_factor,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.multiplex_factor == 0 {
            return Err(Error::invalid("multiplex_factor must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineItem {
    pub item: String,
    pub quantity: usize,
    pub unit_price: f64,
    pub subtotal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BillOfMaterials {
    pub spec: ArchitectureSpec,
    pub items: Vec<LineItem>,
    pub total: f64,
}

pub const TRANSCEIVER_ITEM: &str = "transceiver_ic";

impl BillOfMaterials {
    pub fn subtotal(&self, item: &str) -> f64 {
        self.items
            .iter()
            .filter(|l| l.item == item)
            .map(|l| l.subtotal)
            .sum()
    }

    pub fn quantity(&self, item: &str) -> usize {
        self.items
            .iter()
            .filter(|l| l.item == item)
            .map(|l| l.quantity)
            .sum()
    }

    /// Fraction of the total spent on transceiver ICs; 0 for a zero total.
    pub fn transceiver_share(&self) -> f64 {
        if self.total > 0.0 {
            self.subtotal(TRANSCEIVER_ITEM) / self.total
        } else {
            0.0
        }
    }

    /// Aligned-column table.
    pub fn to_table(&self, currency: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} antennas, multiplex x{}",
            self.spec.n_antennas, self.spec.multiplex_factor
        );
        let _ = writeln!(
            s,
            "{:<16} {:>8} {:>12} {:>12}",
            "item", "qty", "unit", "subtotal"
        );
        for l in &self.items {
            let _ = writeln!(
                s,
                "{:<16} {:>8} {:>12.2} {:>12.2}",
                l.item, l.quantity, l.unit_price, l.subtotal
            );
        }
        let _ = writeln!(
            s,
            "{:<16} {:>8} {:>12} {:>12.2} {currency}",
            "total", "", "", self.total
        );
        s
    }
}

pub fn bill_of_materials(spec: &ArchitectureSpec, prices: &PriceBook) -> Result<BillOfMaterials> {
    spec.validate()?;
    prices.validate()?;
    let n = spec.n_antennas;
    let per_ic = prices.channels_per_ic * spec.multiplex_factor;
    let ics = n.div_ceil(per_ic);
    let switches = if spec.multiplex_factor > 1 { n } else { 0 };
    let items: Vec<LineItem> = [
        (TRANSCEIVER_ITEM, ics, prices.transceiver_ic_price),
        ("pa", n, prices.pa_price),
        ("lna", n, prices.lna_price),
        ("filter", n, prices.filter_price),
        ("rf_switch", switches, prices.switch_price),
    ]
    .into_iter()
    .map(|(item, quantity, unit_price)| LineItem {
        item: item.to_string(),
        quantity,
        unit_price,
        subtotal: quantity as f64 * unit_price,
    })
    .collect();
    let total = items.iter().map(|l| l.subtotal).sum();
    Ok(BillOfMaterials {
        spec: *spec,
        items,
        total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostComparison {
    pub a: BillOfMaterials,
    pub b: BillOfMaterials,
    /// (total_a - total_b) / total_a; 0 when both totals are 0.
    pub savings: f64,
}

pub fn compare(
    a: &ArchitectureSpec,
    b: &ArchitectureSpec,
    prices: &PriceBook,
) -> Result<CostComparison> {
    let a = bill_of_materials(a, prices)?;
    let b = bill_of_materials(b, prices)?;
    let savings = if a.total > 0.0 {
        (a.total - b.total) / a.total
    } else if b.total == 0.0 {
        0.0
    } else {
        f64::NEG_INFINITY
    };
    Ok(CostComparison { a, b, savings })
}
