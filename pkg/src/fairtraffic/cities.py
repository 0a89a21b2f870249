"""Static table of 50 Norwegian cities and towns used by the synthetic generator.

Coordinates are approximate town centers; population weights are relative
traffic-volume multipliers (Oslo largest), not census figures.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class City:
    region_id: str
    latitude: float
    longitude: float
    population_weight: float


NORWAY_CITIES: tuple[City, ...] = (
    City("Oslo", 59.91, 10.75, 10.0),
    City("Bergen", 60.39, 5.32, 6.4),
    City("Trondheim", 63.43, 10.40, 5.0),
    City("Stavanger", 58.97, 5.73, 4.4),
    City("Baerum", 59.89, 10.52, 3.4),
    City("Kristiansand", 58.15, 8.00, 3.0),
    City("Drammen", 59.74, 10.20, 2.9),
    City("Fredrikstad", 59.22, 10.93, 2.7),
    City("Sandnes", 58.85, 5.74, 2.6),
    City("Tromso", 69.65, 18.96, 2.5),
    City("Asker", 59.83, 10.44, 2.3),
    City("Lillestrom", 59.96, 11.05, 2.2),
    City("Sarpsborg", 59.28, 11.11, 2.0),
    City("Skien", 59.21, 9.61, 1.9),
    City("Alesund", 62.47, 6.15, 1.8),
    City("Sandefjord", 59.13, 10.22, 1.7),
    City("Haugesund", 59.41, 5.27, 1.6),
    City("Tonsberg", 59.27, 10.41, 1.6),
    City("Moss", 59.43, 10.66, 1.5),
    City("Porsgrunn", 59.14, 9.66, 1.5),
    City("Bodo", 67.28, 14.40, 1.4),
    City("Arendal", 58.46, 8.77, 1.3),
    City("Hamar", 60.79, 11.07, 1.3),
    City("Larvik", 59.05, 10.03, 1.2),
    City("Halden", 59.13, 11.39, 1.2),
    City("Lillehammer", 61.12, 10.47, 1.1),
    City("Molde", 62.74, 7.16, 1.0),
    City("Mo-i-Rana", 66.31, 14.14, 1.0),
    City("Harstad", 68.80, 16.54, 0.95),
    City("Horten", 59.42, 10.48, 0.95),
    City("Gjovik", 60.80, 10.69, 0.9),
    City("Kristiansund", 63.11, 7.73, 0.9),
    City("Kongsberg", 59.67, 9.65, 0.85),
    City("Jessheim", 60.14, 11.18, 0.85),
    City("Ski", 59.72, 10.84, 0.8),
    City("Honefoss", 60.17, 10.26, 0.8),
    City("Stjordal", 63.47, 10.92, 0.75),
    City("Askim", 59.58, 11.16, 0.75),
    City("Elverum", 60.88, 11.56, 0.7),
    City("Steinkjer", 64.01, 11.49, 0.7),
    City("Narvik", 68.44, 17.43, 0.65),
    City("Grimstad", 58.34, 8.59, 0.65),
    City("Alta", 69.97, 23.27, 0.6),
    City("Drobak", 59.66, 10.63, 0.6),
    City("Levanger", 63.75, 11.30, 0.55),
    City("Mandal", 58.03, 7.45, 0.55),
    City("Egersund", 58.45, 6.00, 0.5),
    City("Voss", 60.63, 6.41, 0.5),
    City("Notodden", 59.56, 9.26, 0.45),
    City("Mosjoen", 65.84, 13.19, 0.45),
)
