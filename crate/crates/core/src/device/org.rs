use std::fmt;

use crate::error::{ConfigError, DeviceError};

/// Physical organization of the simulated memory system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeviceOrg {
    pub channels: u32,
    pub ranks_per_channel: u32,
    pub bank_groups_per_rank: u32,
    pub banks_per_bank_group: u32,
    pub rows_per_bank: u32,
    /// Column addresses in units of one burst (one request payload).
    pub columns_per_row: u32,
    pub channel_width_bits: u32,
    pub burst_length: u32,
}

impl Default for DeviceOrg {
    fn default() -> Self {
        Self::ddr5_4800()
    }
}

impl DeviceOrg {
    /// 16 channels of 32-bit DDR5, one rank, 8 bank groups of 4 banks, BL16.
    pub fn ddr5_4800() -> Self {
        DeviceOrg {
            channels: 16,
            ranks_per_channel: 1,
            bank_groups_per_rank: 8,
            banks_per_bank_group: 4,
            rows_per_bank: 65536,
            columns_per_row: 64,
            channel_width_bits: 32,
            burst_length: 16,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let counts = [
            ("channels", self.channels),
            ("ranks_per_channel", self.ranks_per_channel),
            ("bank_groups_per_rank", self.bank_groups_per_rank),
            ("banks_per_bank_group", self.banks_per_bank_group),
            ("rows_per_bank", self.rows_per_bank),
            ("columns_per_row", self.columns_per_row),
            ("channel_width_bits", self.channel_width_bits),
            ("burst_length", self.burst_length),
        ];
        for (key, v) in counts {
            if v == 0 {
                return Err(ConfigError::range(key, "must be at least 1"));
            }
        }
        if !self.burst_length.is_multiple_of(2) {
            return Err(ConfigError::range(
                "burst_length",
                "must be even (two transfers per clock)",
            ));
        }
        if !(self.channel_width_bits * self.burst_length).is_multiple_of(8) {
            return Err(ConfigError::range(
                "channel_width_bits",
                "channel_width_bits * burst_length must be a whole number of bytes",
            ));
        }
        Ok(())
    }

    pub fn banks_per_rank(&self) -> u32 {
        self.bank_groups_per_rank * self.banks_per_bank_group
    }

    pub fn banks_per_channel(&self) -> u32 {
        self.ranks_per_channel * self.banks_per_rank()
    }

    /// Bytes moved by one RD or WR burst.
    pub fn request_bytes(&self) -> u64 {
        u64::from(self.channel_width_bits) * u64::from(self.burst_length) / 8
    }

    /// Data-bus occupancy of one burst in command clocks (double data rate).
    pub fn burst_nck(&self) -> u64 {
        u64::from(self.burst_length / 2)
    }

    /// Flat bank index within a channel.
    pub fn bank_index(&self, addr: &Address) -> usize {
        ((addr.rank * self.bank_groups_per_rank + addr.bank_group) * self.banks_per_bank_group
            + addr.bank) as usize
    }

    /// Flat bank-group index within a channel.
    pub fn group_index(&self, addr: &Address) -> usize {
        (addr.rank * self.bank_groups_per_rank + addr.bank_group) as usize
    }

    pub fn check_address(&self, addr: &Address) -> Result<(), DeviceError> {
        let fields = [
            ("channel", addr.channel, self.channels),
            ("rank", addr.rank, self.ranks_per_channel),
            ("bank_group", addr.bank_group, self.bank_groups_per_rank),
            ("bank", addr.bank, self.banks_per_bank_group),
            ("row", addr.row, self.rows_per_bank),
            ("column", addr.column, self.columns_per_row),
        ];
        for (field, value, limit) in fields {
            if value >= limit {
                return Err(DeviceError::BadAddress {
                    field,
                    value,
                    limit,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address {
    pub channel: u32,
    pub rank: u32,
    pub bank_group: u32,
    pub bank: u32,
    pub row: u32,
    pub column: u32,
}

impl Address {
    pub fn same_bank(&self, other: &Address) -> bool {
        self.channel == other.channel
            && self.rank == other.rank
            && self.bank_group == other.bank_group
            && self.bank == other.bank
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ch{}/r{}/bg{}/b{}/row{}/col{}",
            self.channel, self.rank, self.bank_group, self.bank, self.row, self.column
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_payload_is_64_bytes() {
        let org = DeviceOrg::ddr5_4800();
        assert_eq!(org.request_bytes(), 64);
        assert_eq!(org.burst_nck(), 8);
        assert_eq!(org.banks_per_channel(), 32);
        org.validate().unwrap();
    }

    #[test]
    fn non_power_of_two_channels_are_fine() {
        let org = DeviceOrg {
            channels: 12,
            ..DeviceOrg::ddr5_4800()
        };
        org.validate().unwrap();
    }

    #[test]
    fn zero_counts_rejected() {
        let org = DeviceOrg {
            banks_per_bank_group: 0,
            ..DeviceOrg::ddr5_4800()
        };
        assert_eq!(
            org.validate().unwrap_err().key(),
            Some("banks_per_bank_group")
        );
    }

    #[test]
    fn address_bounds() {
        let org = DeviceOrg::ddr5_4800();
        let mut a = Address::default();
        assert!(org.check_address(&a).is_ok());
        a.bank_group = 8;
        assert!(matches!(
            org.check_address(&a),
            Err(DeviceError::BadAddress {
                field: "bank_group",
                ..
            })
        ));
    }

    #[test]
    fn flat_indices() {
        let org = DeviceOrg::ddr5_4800();
        let a = Address {
            bank_group: 3,
            bank: 2,
            ..Default::default()
        };
        assert_eq!(org.bank_index(&a), 14);
        assert_eq!(org.group_index(&a), 3);
    }
}
