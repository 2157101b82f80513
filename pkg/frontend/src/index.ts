export * from './tensorFile.js'
export * from './npy.js'
export * from './convertDataset.js'
export * from './exportFeatureMaps.js'
