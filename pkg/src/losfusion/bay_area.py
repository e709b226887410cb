"""San Francisco Bay Area acquisition lists and viewing geometries.

Envisat descending track 70, Envisat ascending track 478 and ALOS ascending
track 222 (frame 740), 2007-2010. Used as fixtures and as the default
acquisition pattern for synthetic scenarios.
"""

from __future__ import annotations

from .geometry import SensorGeometry

ENVISAT_DES_DATES = (
    "20070721", "20070825", "20070929", "20071103", "20071208", "20080112",
    "20080216", "20080322", "20080426", "20080531", "20080705", "20080809",
    "20080913", "20081018", "20081122", "20090131", "20090307", "20090411",
    "20090516", "20090725", "20090829", "20091003", "20091107", "20091212",
    "20100116", "20100220", "20100327", "20100501", "20100605", "20100710",
    "20100814", "20100918",
)

ENVISAT_ASC_DATES = (
    "20070923", "20071202", "20080106", "20080210", "20080316", "20080420",
    "20080525", "20080629", "20080803", "20080907", "20081221", "20090125",
    "20090301", "20090405", "20090510", "20090614", "20090719", "20090823",
    "20090927", "20091101", "20091206", "20100704", "20100808", "20101017",
)

ALOS_ASC_DATES = (
    "20070713", "20070828", "20071013", "20071128", "20080113", "20080228",
    "20080414", "20080530", "20080715", "20081130", "20090115", "20090302",
    "20090602", "20090718", "20091018", "20100420", "20100605", "20100721",
    "20101206",
)


GEOMETRIES = {
    "envisat_des": SensorGeometry("envisat_des", 23.0, 193.0, "right"),
    "envisat_asc": SensorGeometry("envisat_asc", 23.0, 350.0, "right"),
    "alos_asc": SensorGeometry("alos_asc", 34.5, 350.0, "right"),
}

ACQUISITIONS = {
    "envisat_des": ENVISAT_DES_DATES,
    "envisat_asc": ENVISAT_ASC_DATES,
    "alos_asc": ALOS_ASC_DATES,
}
