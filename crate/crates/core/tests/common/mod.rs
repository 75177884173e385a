//! Inputs and reference implementations shared by the integration tests.
#![allow(dead_code)]

pub mod oracle;

/// Chain-of-thought outputs for one street image: vehicle count, sidewalk
/// presence and frontage length, each on a single line.
pub const TRACE_VEHICLES: &str = "There are three motor vehicles visible in the foreground of the image. The first vehicle is a silver car parked closest to the camera. It is fully visible and clearly identifiable as a car. The second vehicle is a blue car parked next to the silver car. It is also fully visible and identifiable as a car. The third vehicle is partially visible behind the blue car. Only the rear portion and part of the side are visible, but it appears to be another car based on its shape and size. There are no additional motor vehicles visible in the background. The focus is on the street frontage, and the background primarily consists of buildings, hedges, and a clear sky. The third vehicle is partially obscured by the blue car, but enough of its structure (e.g., rear lights, wheels, and body shape) is visible to confirm it is a motor vehicle. Bicycles and scooters are not present in the image, so they do not need to be counted. No other types of motor vehicles (e.g., vans, trucks, buses, motorcycles) are visible in the image. - Silver car: 1 - Blue car: 1 - Partially hidden car: 1 ### Answer: 3";
pub const TRACE_SIDEWALK: &str = "The street frontage is the boundary between the public street space and the adjoining plots. In this image, the street frontage is defined by the buildings, fences, and landscaping along the left side of the street. The sidewalk extends along the entire visible length of the street frontage in the image. It starts from the left edge of the image and continues to the right, following the boundary of the properties. While there are some immaterial elements like the edge of the garden or the setback area, the presence of the sidewalk itself is a clear material element that delimits the street frontage. There is no visible perpendicular intersection in the image. However, the sidewalk continues along the entire visible street frontage without interruption. The sidewalk is present and runs along the entire visible street frontage, delimiting the boundary between the public street space and the adjoining plots. ### Conclusion: 1";
pub const TRACE_LENGTH: &str = "The street frontage is the boundary visible along the street, extending from the left edge of the image to the right edge. It includes material elements like buildings, fences, hedges, and immaterial elements like the edge of the garden or parking lot. The street frontage is bounded by the red-brick house on the left and extends to the white building on the right. The red-brick house has a clear facade with doors and windows. A hedge runs along the left side of the house, and there is a parked car in front of it. Two cars are parked in front of the red-brick house. These cars can serve as reference objects for estimating length. The street frontage continues beyond the red-brick house, including a white building and some greenery. The boundary appears to extend to the right edge of the image. Cars are a suitable reference object because they are clearly visible and have a known average length of 4 to 4.5 meters. Using cars will help estimate the length of the street frontage accurately. Car 1 (Silver): This car is fully visible and aligned parallel to the street. Its length is approximately 4 meters. Car 2 (Blue): This car is also fully visible and aligned parallel to the street. Its length is approximately 4 meters. Between the two cars and beyond the blue car, there is additional street frontage. By comparing the space to the length of the cars, we can estimate the remaining length. The space between the two cars appears to be about the width of one car (4 meters). Beyond the blue car, the street frontage extends further. This additional length appears to be roughly equivalent to another car's length (4 meters). Car 1: 4 meters. Space between cars: 4 meters. Car 2: 4 meters. Additional space beyond Car 2: 4 meters. Total estimated length = 4 + 4 + 4 + 4 = 16 meters. Objects farther from the camera appear shorter due to perspective. However, since the cars are relatively close to the camera and spread across the image, the perspective effect is minimal. The estimates remain reasonably accurate. Final Answer: 16";
