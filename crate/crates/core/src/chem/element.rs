//! Periodic-table data used by the parser and the descriptor calculator.

/// (symbol, monoisotopic mass of the most abundant isotope)
const ELEMENTS: [(&str, f64); 118] = [
    ("H", 1.007_825_032),
    ("He", 4.002_603_254),
    ("Li", 7.016_003_437),
    ("Be", 9.012_183_07),
    ("B", 11.009_305_36),
    ("C", 12.0),
    ("N", 14.003_074_004),
    ("O", 15.994_914_620),
    ("F", 18.998_403_163),
    ("Ne", 19.992_440_18),
    ("Na", 22.989_769_28),
    ("Mg", 23.985_041_70),
    ("Al", 26.981_538_4),
    ("Si", 27.976_926_53),
    ("P", 30.973_761_998),
    ("S", 31.972_071_17),
    ("Cl", 34.968_852_68),
    ("Ar", 39.962_383_12),
    ("K", 38.963_706_49),
    ("Ca", 39.962_590_86),
    ("Sc", 44.955_908_3),
    ("Ti", 47.947_941_2),
    ("V", 50.943_957_0),
    ("Cr", 51.940_505_8),
    ("Mn", 54.938_043_9),
    ("Fe", 55.934_936_3),
    ("Co", 58.933_194_4),
    ("Ni", 57.935_342_4),
    ("Cu", 62.929_597_7),
    ("Zn", 63.929_142_0),
    ("Ga", 68.925_573_5),
    ("Ge", 73.921_177_76),
    ("As", 74.921_594_6),
    ("Se", 79.916_521_8),
    ("Br", 78.918_337_6),
    ("Kr", 83.911_497_7),
    ("Rb", 84.911_789_74),
    ("Sr", 87.905_612_5),
    ("Y", 88.905_840_3),
    ("Zr", 89.904_697_7),
    ("Nb", 92.906_373_0),
    ("Mo", 97.905_404_8),
    ("Tc", 97.907_212_4),
    ("Ru", 101.904_344_1),
    ("Rh", 102.905_498_0),
    ("Pd", 105.903_480_4),
    ("Ag", 106.905_091_6),
    ("Cd", 113.903_365_1),
    ("In", 114.903_878_8),
    ("Sn", 119.902_201_6),
    ("Sb", 120.903_812_0),
    ("Te", 129.906_222_7),
    ("I", 126.904_471_9),
    ("Xe", 131.904_155_1),
    ("Cs", 132.905_451_96),
    ("Ba", 137.905_247_0),
    ("La", 138.906_356_3),
    ("Ce", 139.905_448_6),
    ("Pr", 140.907_657_6),
    ("Nd", 141.907_728_8),
    ("Pm", 144.912_755_9),
    ("Sm", 151.919_739_7),
    ("Eu", 152.921_238_0),
    ("Gd", 157.924_112_3),
    ("Tb", 158.925_354_7),
    ("Dy", 163.929_181_9),
    ("Ho", 164.930_328_8),
    ("Er", 165.930_299_5),
    ("Tm", 168.934_217_9),
    ("Yb", 173.938_866_4),
    ("Lu", 174.940_777_2),
    ("Hf", 179.946_557_0),
    ("Ta", 180.947_999_6),
    ("W", 183.950_932_6),
    ("Re", 186.955_752_2),
    ("Os", 191.961_477_0),
    ("Ir", 192.962_921_6),
    ("Pt", 194.964_791_7),
    ("Au", 196.966_568_8),
    ("Hg", 201.970_643_0),
    ("Tl", 204.974_427_5),
    ("Pb", 207.976_652_5),
    ("Bi", 208.980_398_7),
    ("Po", 208.982_430_8),
    ("At", 209.987_147_9),
    ("Rn", 222.017_577_7),
    ("Fr", 223.019_735_9),
    ("Ra", 226.025_409_8),
    ("Ac", 227.027_752_3),
    ("Th", 232.038_055_8),
    ("Pa", 231.035_884_2),
    ("U", 238.050_788_4),
    ("Np", 237.048_173_6),
    ("Pu", 244.064_204_5),
    ("Am", 243.061_381_3),
    ("Cm", 247.070_354_1),
    ("Bk", 247.070_307_3),
    ("Cf", 251.079_588_6),
    ("Es", 252.082_980),
    ("Fm", 257.095_106_1),
    ("Md", 258.098_431_5),
    ("No", 259.101_03),
    ("Lr", 262.109_61),
    ("Rf", 267.121_79),
    ("Db", 268.125_67),
    ("Sg", 271.133_93),
    ("Bh", 272.138_26),
    ("Hs", 270.134_29),
    ("Mt", 276.151_59),
    ("Ds", 281.164_51),
    ("Rg", 280.165_14),
    ("Cn", 285.177_12),
    ("Nh", 284.178_73),
    ("Fl", 289.190_42),
    ("Mc", 288.192_74),
    ("Lv", 293.204_49),
    ("Ts", 292.207_46),
    ("Og", 294.213_92),
];

/// Atomic number for an element symbol (case-sensitive, e.g. `"Cl"`).
/// The SMILES wildcard `*` maps to 0.
pub fn atomic_number(symbol: &str) -> Option<u8> {
    if symbol == "*" {
        return Some(0);
    }
    ELEMENTS
        .iter()
        .position(|(s, _)| *s == symbol)
        .map(|i| (i + 1) as u8)
}

/// Element symbol for an atomic number; `*` for 0.
pub fn symbol(atomic_number: u8) -> &'static str {
    match atomic_number {
        0 => "*",
        z => ELEMENTS.get(z as usize - 1).map(|(s, _)| *s).unwrap_or("*"),
    }
}

pub fn monoisotopic_mass(atomic_number: u8) -> f64 {
    match atomic_number {
        0 => 0.0,
        z => ELEMENTS.get(z as usize - 1).map(|(_, m)| *m).unwrap_or(0.0),
    }
}

/// Standard valences for organic-subset atoms, ascending.
pub fn default_valences(atomic_number: u8) -> &'static [u8] {
    match atomic_number {
        5 => &[3],
        6 => &[4],
        7 => &[3, 5],
        8 => &[2],
        15 => &[3, 5],
        16 => &[2, 4, 6],
        9 | 17 | 35 | 53 => &[1],
        _ => &[],
    }
}

/// Elements that may be written as lowercase aromatic atoms.
pub fn can_be_aromatic(atomic_number: u8) -> bool {
    matches!(atomic_number, 5 | 6 | 7 | 8 | 15 | 16)
}

pub fn is_halogen(atomic_number: u8) -> bool {
    matches!(atomic_number, 9 | 17 | 35 | 53 | 85)
}

pub const HYDROGEN: u8 = 1;
pub const CARBON: u8 = 6;
pub const NITROGEN: u8 = 7;
pub const OXYGEN: u8 = 8;
